"""A small conic-program builder for Hermitian semidefinite programs.

Decision variables are real vectors. A Hermitian ``n x n`` variable occupies
``n**2`` real coordinates (diagonal, real and imaginary parts of the strict
upper triangle) and is exposed as an :class:`Affine` expression. Expressions
support the handful of operations the beamforming problems need: sums,
constant scaling, products with constant matrices, traces, Kronecker
products with constants, and vectorization.

Compilation targets Clarabel's standard form ``A x + s = b, s in K``. Every
Hermitian PSD condition is passed through the real embedding
``[[Re L, -Im L], [Im L, Re L]]`` before entering a real PSD cone.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field
from typing import IO, NamedTuple

import clarabel
import cvxopt
import numpy as np
import scipy.sparse as sp

from .linalg import RANK_ONE_RATIO, eig_hermitian

DEFAULT_TOL = 1e-8
FEASIBILITY_SLACK = 1e-6
REDUCED_GAP = 1e-6  # relative duality gap accepted when the solver stalls near optimality

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


class Affine:
    """Affine map from the decision vector to a (possibly complex) array.

    ``const`` has the expression's shape; ``terms`` maps a variable block id
    to a coefficient array of shape ``shape + (block_size,)``.
    """

    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, const, terms=None):
        self.const = np.asarray(const, dtype=complex)
        self.terms = {} if terms is None else terms

    @property
    def shape(self) -> tuple[int, ...]:
        return self.const.shape

    def _map(self, fconst, fterm) -> "Affine":
        return Affine(fconst(self.const), {b: fterm(t) for b, t in self.terms.items()})

    def __add__(self, other):
        if not isinstance(other, Affine):
            return Affine(self.const + other, dict(self.terms))
        terms = dict(self.terms)
        for b, t in other.terms.items():
            terms[b] = terms[b] + t if b in terms else t
        return Affine(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return self._map(np.negative, np.negative)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = np.asarray(other)
        if other.ndim == 0:
            return self._map(lambda c: c * other, lambda t: t * other)
        return Affine(self.const * other, {b: t * other[..., None] for b, t in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / other)

    def __matmul__(self, M):
        M = np.asarray(M)
        if self.const.ndim == 2 and M.ndim == 2:
            return self._map(lambda c: c @ M, lambda t: np.einsum("ijv,jk->ikv", t, M))
        if self.const.ndim == 2 and M.ndim == 1:
            return self._map(lambda c: c @ M, lambda t: np.einsum("ijv,j->iv", t, M))
        if self.const.ndim == 1 and M.ndim == 2:
            return self._map(lambda c: c @ M, lambda t: np.einsum("jv,jk->kv", t, M))
        raise ValueError(f"unsupported matmul {self.shape} @ {M.shape}")

    def __rmatmul__(self, M):
        M = np.asarray(M)
        if M.ndim == 2 and self.const.ndim == 2:
            return self._map(lambda c: M @ c, lambda t: np.einsum("ki,ijv->kjv", M, t))
        if M.ndim == 2 and self.const.ndim == 1:
            return self._map(lambda c: M @ c, lambda t: np.einsum("ki,iv->kv", M, t))
        if M.ndim == 1 and self.const.ndim == 2:
            return self._map(lambda c: M @ c, lambda t: np.einsum("i,ijv->jv", M, t))
        if M.ndim == 1 and self.const.ndim == 1:
            return self._map(lambda c: M @ c, lambda t: np.einsum("i,iv->v", M, t))
        raise ValueError(f"unsupported matmul {M.shape} @ {self.shape}")

    def __getitem__(self, idx):
        return self._map(lambda c: c[idx], lambda t: t[idx])

    @property
    def H(self) -> "Affine":
        return self._map(lambda c: c.conj().T, lambda t: np.conj(t).transpose(1, 0, 2))

    @property
    def T(self) -> "Affine":
        return self._map(lambda c: c.T, lambda t: t.transpose(1, 0, 2))

    @property
    def real(self) -> "Affine":
        return self._map(lambda c: c.real.astype(complex), lambda t: t.real.astype(complex))

    @property
    def imag(self) -> "Affine":
        return self._map(lambda c: c.imag.astype(complex), lambda t: t.imag.astype(complex))

    def trace(self) -> "Affine":
        return self._map(np.trace, lambda t: np.einsum("iiv->v", t))

    def diag(self) -> "Affine":
        return self._map(np.diag, lambda t: np.einsum("iiv->iv", t))

    def vec(self) -> "Affine":
        """Column-stacking vectorization."""
        def _t(t):
            return t.transpose(1, 0, 2).reshape(-1, t.shape[-1])
        return Affine(self.const.reshape(-1, order="F"), {b: _t(t) for b, t in self.terms.items()})

    def value(self, blocks: dict[int, np.ndarray]) -> np.ndarray:
        out = self.const.copy()
        for b, t in self.terms.items():
            out = out + t @ blocks[b]
        return out


def inner(C, X: Affine) -> Affine:
    """Real part of Tr(C X) for a constant matrix ``C``."""
    C = np.asarray(C)
    out = Affine(np.real(np.sum(C.T * X.const)), {
        b: np.einsum("ij,jiv->v", C, t).real.astype(complex) for b, t in X.terms.items()
    })
    return out


def kron(A, B) -> Affine:
    """Kronecker product where exactly one factor is an :class:`Affine`."""
    if isinstance(A, Affine) and not isinstance(B, Affine):
        B = np.asarray(B)
        (p, q), (r, s) = A.shape, B.shape
        return A._map(
            lambda c: np.kron(c, B),
            lambda t: np.einsum("ijv,kl->ikjlv", t, B).reshape(p * r, q * s, t.shape[-1]),
        )
    if isinstance(B, Affine) and not isinstance(A, Affine):
        A = np.asarray(A)
        (p, q), (r, s) = A.shape, B.shape
        return B._map(
            lambda c: np.kron(A, c),
            lambda t: np.einsum("ij,klv->ikjlv", A, t).reshape(p * r, q * s, t.shape[-1]),
        )
    raise TypeError("kron needs exactly one Affine factor")


@functools.lru_cache(maxsize=64)
def _hermitian_basis(n: int) -> np.ndarray:
    basis = np.zeros((n, n, n * n), dtype=complex)
    for i in range(n):
        basis[i, i, i] = 1.0
    iu, ju = np.triu_indices(n, 1)
    m = iu.size
    for p, (i, j) in enumerate(zip(iu, ju)):
        basis[i, j, n + p] = basis[j, i, n + p] = 1.0
        basis[i, j, n + m + p] = 1j
        basis[j, i, n + m + p] = -1j
    basis.setflags(write=False)
    return basis


@functools.lru_cache(maxsize=64)
def _svec_index(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Clarabel: upper triangle, column by column, off-diagonals scaled by sqrt(2)
    r, c = np.tril_indices(n)
    scale = np.where(r == c, 1.0, np.sqrt(2.0))
    return c, r, scale


def _embed_tensor(T: np.ndarray) -> np.ndarray:
    """Real embedding applied along the two leading axes."""
    re, im = T.real, T.imag
    top = np.concatenate([re, -im], axis=1)
    bot = np.concatenate([im, re], axis=1)
    return np.concatenate([top, bot], axis=0)


@dataclass
class SolveStatus:
    status: str
    objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    duality_gap: float = float("nan")
    solver_status: str = ""
    solve_time: float = 0.0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _Block:
    name: str
    kind: str
    size: int
    dim: int = 0


@dataclass
class ConicProblem:
    """Container for variables, a linear objective and conic constraints.

    Build it, call :func:`solve`, and do not modify it afterwards.
    """

    blocks: list[_Block] = field(default_factory=list)
    objective: Affine | None = None
    equalities: list[Affine] = field(default_factory=list)
    inequalities: list[Affine] = field(default_factory=list)
    lmis: list[Affine] = field(default_factory=list)
    quadratics: list[tuple[Affine, Affine]] = field(default_factory=list)
    _lmi_names: list[str] = field(default_factory=list)

    def hermitian(self, n: int, name: str, psd: bool = True) -> Affine:
        bid = len(self.blocks)
        self.blocks.append(_Block(name, "hermitian", n * n, n))
        X = Affine(np.zeros((n, n), dtype=complex), {bid: _hermitian_basis(n)})
        if psd:
            self.add_psd(X, name=f"{name} >= 0")
        return X

    def scalar(self, name: str, nonneg: bool = True) -> Affine:
        bid = len(self.blocks)
        self.blocks.append(_Block(name, "scalar", 1))
        x = Affine(0.0, {bid: np.ones(1, dtype=complex)})
        if nonneg:
            self.add_le(-x)
        return x

    def minimize(self, expr: Affine) -> None:
        if expr.shape != ():
            raise ValueError("objective must be scalar")
        self.objective = expr

    def add_eq(self, expr: Affine) -> None:
        """Constrain every entry of a real expression to zero."""
        self.equalities.append(expr)

    def add_le(self, expr: Affine) -> None:
        """Constrain every entry of a real expression to be nonpositive."""
        self.inequalities.append(expr)

    def add_psd(self, expr: Affine, name: str = "") -> None:
        if len(expr.shape) != 2 or expr.shape[0] != expr.shape[1]:
            raise ValueError(f"LMI needs a square expression, got {expr.shape}")
        self.lmis.append(expr)
        self._lmi_names.append(name)

    def add_half_sq_le(self, y: Affine, bound: Affine) -> None:
        """Constrain 0.5 * ||y||^2 <= bound; complex ``y`` counts both parts."""
        self.quadratics.append((y, bound))

    # ---- compilation -------------------------------------------------

    @property
    def n_vars(self) -> int:
        return sum(b.size for b in self.blocks)

    def _offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([b.size for b in self.blocks])]).astype(int)

    def _dense(self, expr: Affine, offsets) -> tuple[np.ndarray, np.ndarray]:
        shape = expr.shape
        m = int(np.prod(shape)) if shape else 1
        coef = np.zeros((m, self.n_vars), dtype=complex)
        for b, t in expr.terms.items():
            coef[:, offsets[b]:offsets[b + 1]] = t.reshape(m, -1)
        return expr.const.reshape(m), coef

    def compile(self):
        """Return ``(q, q0, A, b, cones)`` for ``A x + s = b, s in K``.

        ``cones`` is a list of ``(kind, dim)`` with kind one of ``zero``,
        ``nonneg``, ``soc`` or ``psd``; PSD slacks are stored as the scaled
        upper triangle, column by column.
        """
        if self.objective is None:
            raise ValueError("no objective set")
        off = self._offsets()
        c0, cq = self._dense(self.objective, off)
        q, q0 = cq[0].real, float(c0[0].real)
        rows_A, rows_b, cones = [], [], []

        def _real_rows(exprs):
            for e in exprs:
                c, a = self._dense(e, off)
                yield c.real, a.real

        zero = [(c, a) for c, a in _real_rows(self.equalities)]
        if zero:
            c = np.concatenate([z[0] for z in zero])
            rows_A.append(np.vstack([z[1] for z in zero]))
            rows_b.append(-c)
            cones.append(("zero", c.size))
        nonneg = [(c, a) for c, a in _real_rows(self.inequalities)]
        if nonneg:
            c = np.concatenate([z[0] for z in nonneg])
            rows_A.append(np.vstack([z[1] for z in nonneg]))
            rows_b.append(-c)
            cones.append(("nonneg", c.size))
        for y, bound in self.quadratics:
            cy, ay = self._dense(y, off)
            cb, ab = self._dense(bound, off)
            k0 = np.concatenate([
                [(cb[0].real + 1) / np.sqrt(2), (cb[0].real - 1) / np.sqrt(2)], cy.real, cy.imag
            ])
            k = np.vstack([ab.real / np.sqrt(2), ab.real / np.sqrt(2), ay.real, ay.imag])
            rows_A.append(-k)
            rows_b.append(k0)
            cones.append(("soc", k0.size))
        for L in self.lmis:
            n = L.shape[0]
            c, a = self._dense(L, off)
            c = c.reshape(n, n)
            c = 0.5 * (c + c.conj().T)
            a = a.reshape(n, n, -1)
            a = 0.5 * (a + np.conj(a).transpose(1, 0, 2))
            ec = _embed_tensor(c[..., None])[..., 0]
            ea = _embed_tensor(a)
            i, j, s = _svec_index(2 * n)
            rows_A.append(-ea[i, j, :] * s[:, None])
            rows_b.append(ec[i, j] * s)
            cones.append(("psd", 2 * n))
        A = sp.csc_matrix(np.vstack(rows_A)) if rows_A else sp.csc_matrix((0, self.n_vars))
        b = np.concatenate(rows_b) if rows_b else np.zeros(0)
        return q, q0, A, b, cones

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray | float]:
        off = self._offsets()
        out: dict[str, np.ndarray | float] = {}
        for bid, blk in enumerate(self.blocks):
            xb = x[off[bid]:off[bid + 1]]
            if blk.kind == "hermitian":
                out[blk.name] = _hermitian_basis(blk.dim) @ xb
            else:
                out[blk.name] = float(xb[0])
        return out

    def blocks_of(self, x: np.ndarray) -> dict[int, np.ndarray]:
        off = self._offsets()
        return {bid: x[off[bid]:off[bid + 1]] for bid in range(len(self.blocks))}

    def max_violation(self, x: np.ndarray) -> float:
        """Largest scaled constraint violation at ``x``."""
        blocks = self.blocks_of(x)
        worst = 0.0
        for e in self.equalities:
            val = e.value(blocks).real
            worst = max(worst, float(np.max(np.abs(val), initial=0.0)) / (1 + _magnitude(e, blocks)))
        for e in self.inequalities:
            val = e.value(blocks).real
            worst = max(worst, float(np.max(val, initial=0.0)) / (1 + _magnitude(e, blocks)))
        for y, bound in self.quadratics:
            yv, bv = y.value(blocks), float(bound.value(blocks).real)
            excess = 0.5 * float(np.sum(np.abs(yv) ** 2)) - bv
            worst = max(worst, excess / (1 + abs(bv) + 0.5 * float(np.sum(np.abs(yv) ** 2))))
        for L in self.lmis:
            Lv = L.value(blocks)
            Lv = 0.5 * (Lv + Lv.conj().T)
            lam = np.linalg.eigvalsh(Lv)
            worst = max(worst, -float(lam[0]) / max(1.0, float(np.max(np.abs(lam)))))
        return worst

    def dump(self, stream: IO[str]) -> None:
        """Write the compiled problem as self-describing text."""
        q, q0, A, b, cones = self.compile()
        stream.write("# conic problem: minimize q'x + q0 s.t. A x + s = b, s in K\n")
        for blk in self.blocks:
            stream.write(f"variable {blk.name} {blk.kind} size={blk.size} dim={blk.dim}\n")
        for kind, dim in cones:
            stream.write(f"cone {kind} {dim}\n")
        stream.write(f"q0 {q0:.17g}\n")
        stream.write("q " + " ".join(f"{v:.17g}" for v in q) + "\n")
        stream.write("b " + " ".join(f"{v:.17g}" for v in b) + "\n")
        coo = A.tocoo()
        stream.write(f"A {A.shape[0]} {A.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            stream.write(f"{i} {j} {v:.17g}\n")


def _magnitude(e: Affine, blocks) -> float:
    mag = float(np.max(np.abs(e.const), initial=0.0))
    for bid, t in e.terms.items():
        mag = max(mag, float(np.max(np.abs(t * blocks[bid]), initial=0.0)))
    return mag


_CLARABEL_CONES = {
    "zero": clarabel.ZeroConeT,
    "nonneg": clarabel.NonnegativeConeT,
    "soc": clarabel.SecondOrderConeT,
    "psd": clarabel.PSDTriangleConeT,
}
_CLARABEL_INFEASIBLE = {"PrimalInfeasible", "AlmostPrimalInfeasible"}


@dataclass
class _Raw:
    x: np.ndarray | None
    status: str  # "solved", "reduced", "infeasible" or "failed"
    primal_obj: float = float("nan")
    dual_obj: float = float("nan")
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    iterations: int = 0
    solver_status: str = ""


def _run_clarabel(q, A, b, cones, tol, max_iter) -> _Raw:
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_iter = max_iter
    n = q.size
    solver = clarabel.DefaultSolver(
        sp.csc_matrix((n, n)), q, A, b, [_CLARABEL_CONES[k](d) for k, d in cones], settings)
    sol = solver.solve()
    raw = str(sol.status)
    if raw in _CLARABEL_INFEASIBLE:
        kind = "infeasible"
    elif raw == "Solved":
        kind = "solved"
    elif raw == "AlmostSolved":
        kind = "reduced"
    else:
        kind = "failed"
    return _Raw(np.asarray(sol.x), kind, float(sol.obj_val), float(sol.obj_val_dual),
                float(sol.r_prim), float(sol.r_dual), int(sol.iterations), raw)


def _cvxopt_blocks(A, b, cones):
    """Split rows by cone and expand packed PSD rows to full column-major storage."""
    A = A.tocsr()
    eq_A, eq_b, lin, soc, psd = [], [], [], [], []
    row = 0
    for kind, dim in cones:
        if kind == "psd":
            m = dim * (dim + 1) // 2
            blk, hb = A[row:row + m], b[row:row + m]
            row += m
            iu, ju = np.triu_indices(dim)
            order = np.lexsort((iu, ju))  # column by column
            iu, ju = iu[order], ju[order]
            scale = np.where(iu == ju, 1.0, 1.0 / np.sqrt(2.0))
            full = np.empty(dim * dim, dtype=int)
            full[ju * dim + iu] = np.arange(m)
            full[iu * dim + ju] = np.arange(m)
            sc = np.empty(dim * dim)
            sc[ju * dim + iu] = scale
            sc[iu * dim + ju] = scale
            psd.append((sp.diags(sc) @ blk[full], hb[full] * sc, dim))
            continue
        blk, hb = A[row:row + dim], b[row:row + dim]
        row += dim
        {"zero": lambda: (eq_A.append(blk), eq_b.append(hb)),
         "nonneg": lambda: lin.append((blk, hb)),
         "soc": lambda: soc.append((blk, hb, dim))}[kind]()
    return eq_A, eq_b, lin, soc, psd


def _spmatrix(M):
    M = sp.coo_matrix(M)
    return cvxopt.spmatrix(M.data.tolist(), M.row.tolist(), M.col.tolist(), M.shape)


_CVXOPT_TIGHT = {"abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-9}
_CVXOPT_DEFAULT = {"abstol": 1e-7, "reltol": 1e-6, "feastol": 1e-7}


def _run_cvxopt(q, A, b, cones, tol, max_iter) -> _Raw:
    eq_A, eq_b, lin, soc, psd = _cvxopt_blocks(A, b, cones)
    parts = lin + [(g, h) for g, h, _ in soc] + [(g, h) for g, h, _ in psd]
    n = q.size
    G = sp.vstack([g for g, _ in parts]) if parts else sp.csr_matrix((0, n))
    h = np.concatenate([h for _, h in parts]) if parts else np.zeros(0)
    dims = {"l": int(sum(g.shape[0] for g, _ in lin)), "q": [d for *_, d in soc],
            "s": [d for *_, d in psd]}
    args = [cvxopt.matrix(q), _spmatrix(G), cvxopt.matrix(h), dims]
    if eq_A:
        args += [_spmatrix(sp.vstack(eq_A)), cvxopt.matrix(np.concatenate(eq_b))]
    # tight tolerances first; the solver can break down in its scaling update
    # very close to a low-rank optimum, in which case we retry at its defaults
    ladder = [{k: max(v, tol) for k, v in _CVXOPT_TIGHT.items()}, _CVXOPT_DEFAULT]
    sol, last = None, None
    for opts in ladder:
        try:
            sol = cvxopt.solvers.conelp(
                *args, options={"show_progress": False, "maxiters": max_iter, **opts})
        except (ArithmeticError, ValueError) as exc:
            last = exc
            continue
        if sol["status"] in ("optimal", "primal infeasible"):
            break
    if sol is None:
        return _Raw(None, "failed", solver_status=f"cvxopt error: {last}")
    raw = sol["status"]
    if raw == "primal infeasible":
        kind = "infeasible"
    elif raw == "optimal":
        kind = "solved"
    elif sol["x"] is not None:
        kind = "reduced"
    else:
        kind = "failed"
    x = np.asarray(sol["x"]).ravel() if sol["x"] is not None else None
    def _f(key):
        val = sol.get(key)
        return float(val) if val is not None else float("nan")
    return _Raw(x, kind, _f("primal objective"), _f("dual objective"),
                _f("primal infeasibility"), _f("dual infeasibility"), int(sol["iterations"]), raw)


BACKENDS = {"cvxopt": _run_cvxopt, "clarabel": _run_clarabel}
DEFAULT_BACKEND = "cvxopt"


def solve(problem: ConicProblem, tol: float = DEFAULT_TOL, max_iter: int = 200,
          backend: str | None = None):
    """Solve ``problem``; returns ``(SolveStatus, values)``.

    ``values`` maps variable names to complex Hermitian matrices or floats and
    is empty unless the status is optimal. Infeasibility is reported through
    the status, never raised. A solver stall short of full accuracy still
    counts as optimal when the relative duality gap is below ``REDUCED_GAP``
    and the post-solve feasibility check passes; the status message then
    says so.
    """
    backend = backend or DEFAULT_BACKEND
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {sorted(BACKENDS)}")
    q, q0, A, b, cones = problem.compile()
    t0 = time.perf_counter()
    raw = BACKENDS[backend](q, A, b, cones, tol, max_iter)
    base = dict(
        primal_residual=raw.primal_residual,
        dual_residual=raw.dual_residual,
        iterations=raw.iterations,
        solver_status=f"{backend}:{raw.solver_status}",
        solve_time=time.perf_counter() - t0,
    )
    if raw.status == "infeasible":
        return SolveStatus(INFEASIBLE, float("nan"), **base), {}
    gap = abs(raw.primal_obj - raw.dual_obj)
    reduced = raw.status == "reduced" and gap <= REDUCED_GAP * max(1.0, abs(raw.primal_obj))
    if raw.x is None or (raw.status != "solved" and not reduced):
        return SolveStatus(NUMERICAL_FAILURE, float("nan"),
                           message=f"solver stopped: {raw.solver_status}", **base), {}
    violation = problem.max_violation(raw.x)
    if violation > FEASIBILITY_SLACK:
        return SolveStatus(
            NUMERICAL_FAILURE, float("nan"), duality_gap=gap,
            message=f"post-solve constraint violation {violation:.2e}", **base
        ), {}
    objective = float(q @ raw.x + q0)
    note = "reduced accuracy" if reduced else ""
    return SolveStatus(OPTIMAL, objective, duality_gap=gap, message=note, **base), problem.unpack(raw.x)


class RankOne(NamedTuple):
    vector: np.ndarray
    ratio: float
    tight: bool


def extract_rank_one(X, mode: str = "beamformer", ratio_tol: float = RANK_ONE_RATIO) -> RankOne:
    """Recover a vector from a (nearly) rank-one PSD matrix.

    In ``"beamformer"`` mode the principal eigenvector is scaled by the root of
    the largest eigenvalue. In ``"phase"`` mode the lifted matrix has size
    ``M + 1``; the vector is rotated so its last entry is real positive and the
    first ``M`` entries are projected to unit modulus and returned.
    ``ratio`` is lambda_2 / lambda_1, the tightness witness.
    """
    lam, U = eig_hermitian(X)
    ratio = float(max(lam[1], 0.0) / lam[0]) if lam.size > 1 and lam[0] > 0 else 0.0
    if mode == "beamformer":
        return RankOne(np.sqrt(max(lam[0], 0.0)) * U[:, 0], ratio, ratio <= ratio_tol)
    if mode != "phase":
        raise ValueError(f"unknown mode {mode!r}")
    return RankOne(_align_unit(U[:, 0]), ratio, ratio <= ratio_tol)


def _align_unit(v: np.ndarray) -> np.ndarray:
    # rotate so the auxiliary last entry has zero phase, then unit-modulus projection
    aux = v[-1]
    if abs(aux) > 0:
        v = v * (abs(aux) / aux)
    head = v[:-1]
    mag = np.abs(head)
    out = np.ones_like(head)
    nz = mag > 1e-300
    out[nz] = head[nz] / mag[nz]
    return out


def gaussian_randomize(V, draws: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Draw ``v ~ CN(0, V)`` and map each draw to unit-modulus phases."""
    if draws <= 0:
        return []
    lam, U = eig_hermitian(V)
    L = U * np.sqrt(np.clip(lam, 0.0, None))
    n = L.shape[0]
    z = (rng.standard_normal((n, draws)) + 1j * rng.standard_normal((n, draws))) / np.sqrt(2)
    samples = L @ z
    return [_align_unit(samples[:, i]) for i in range(draws)]
