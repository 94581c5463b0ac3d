"""Dense Hermitian linear algebra used throughout the package.

Hermitian matrices are plain complex ``ndarray`` objects. Wherever a matrix
enters from outside, :func:`as_hermitian` makes the upper triangle
authoritative and mirrors it into the lower one, so the two halves can never
drift apart.
"""

from __future__ import annotations

import numpy as np

RANK_ONE_RATIO = 1e-6


def as_hermitian(A) -> np.ndarray:
    """Return a Hermitian copy of ``A`` built from its upper triangle."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    upper = np.triu(A, 1)
    return upper + upper.conj().T + np.diag(A.diagonal().real)


def as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


def _phase_normalize(U: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made real and nonnegative
    idx = np.argmax(np.abs(U), axis=0)
    pivots = U[idx, np.arange(U.shape[1])]
    rot = np.ones_like(pivots)
    nz = np.abs(pivots) > 0
    rot[nz] = np.abs(pivots[nz]) / pivots[nz]
    return U * rot


def eig_hermitian(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition with eigenvalues sorted in descending order.

    Each eigenvector is rotated so that its largest-magnitude entry is real
    and nonnegative, which makes downstream extraction deterministic.
    """
    H = as_hermitian(A)
    lam, U = np.linalg.eigh(H)
    lam = lam[::-1]
    U = _phase_normalize(U[:, ::-1])
    return lam, U


def hermitian_norms(A) -> tuple[float, float, float]:
    """Spectral, nuclear and Frobenius norms from one eigendecomposition."""
    lam, _ = eig_hermitian(A)
    mag = np.abs(lam)
    return float(mag.max()), float(mag.sum()), float(np.sqrt(np.sum(lam**2)))


def _check_psd(lam: np.ndarray) -> None:
    scale = max(float(np.sum(np.abs(lam))), np.finfo(float).tiny)
    if lam[-1] < -1e-8 * scale:
        raise ValueError(
            f"matrix is indefinite: smallest eigenvalue {lam[-1]:.3e} "
            f"below tolerance -1e-8 * {scale:.3e}"
        )


def rank_one_gap(A) -> float:
    """Nuclear norm minus spectral norm of a PSD matrix (zero iff rank <= 1)."""
    lam, _ = eig_hermitian(A)
    _check_psd(lam)
    mag = np.abs(lam)
    return float(max(mag.sum() - mag.max(), 0.0))


def eigen_ratio(A) -> float:
    """Second-largest over largest eigenvalue; 0 for 1x1 or zero matrices."""
    lam, _ = eig_hermitian(A)
    if lam.size < 2 or lam[0] <= 0:
        return 0.0
    return float(max(lam[1], 0.0) / lam[0])


def is_rank_one(A, ratio: float = RANK_ONE_RATIO) -> bool:
    return eigen_ratio(A) <= ratio


def vec(X) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(X).reshape(-1, order="F")


def kron_vec_identity_check(A, B, C, D) -> float:
    """Discrepancy between Tr(A^H B C D) and vec(A)^H (D^T kron B) vec(C).

    A is p x q, B is p x r, C is r x s and D is s x q.
    """
    A, B, C, D = (np.atleast_2d(np.asarray(m, dtype=complex)) for m in (A, B, C, D))
    p, q = A.shape
    if B.shape[0] != p or C.shape[0] != B.shape[1] or D.shape != (C.shape[1], q):
        raise ValueError(
            "non-conformable shapes "
            f"A{A.shape} B{B.shape} C{C.shape} D{D.shape}"
        )
    lhs = np.trace(A.conj().T @ B @ C @ D)
    rhs = vec(A).conj() @ np.kron(D.T, B) @ vec(C)
    return float(abs(lhs - rhs))


def embed_hermitian_real(A) -> np.ndarray:
    """Real symmetric embedding [[Re A, -Im A], [Im A, Re A]]."""
    H = as_hermitian(A)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def principal(A) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and its unit eigenvector."""
    lam, U = eig_hermitian(A)
    return float(lam[0]), U[:, 0]


def project_psd(A) -> np.ndarray:
    lam, U = eig_hermitian(A)
    return (U * np.clip(lam, 0.0, None)) @ U.conj().T


def quadratic_split(X, Y, a: float = 1.0) -> tuple[float, float, float]:
    """Terms of the difference-of-convex form of Tr(XY) for Hermitian X, Y.

    Returns ``(convex, concave_x, concave_y)`` with
    ``Tr(XY) = convex - concave_x - concave_y``, where ``convex`` is
    ``0.5 ||a X + Y / a||_F^2``; any ``a > 0`` is valid and only changes the
    balance of the two halves.
    """
    if a <= 0:
        raise ValueError("split weight a must be positive")
    X, Y = as_hermitian(X), as_hermitian(Y)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Y.shape}")
    convex = 0.5 * np.linalg.norm(a * X + Y / a) ** 2
    return float(convex), float(0.5 * a**2 * np.linalg.norm(X) ** 2), float(0.5 * np.linalg.norm(Y) ** 2 / a**2)
