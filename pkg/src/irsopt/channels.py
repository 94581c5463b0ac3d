"""Scenario configuration, random channel generation and SINR evaluation.

Geometry: AP at the origin serving a sector centred on the +x axis. The IRSs
sit on the cell-edge arc at evenly spaced angles and face the AP; users are
uniform over the (annular) sector. All arrays are half-wavelength ULAs.

Powers are in watts and SINRs linear everywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import IO, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

_PURPOSES = {"placement": 0, "channel": 1, "csi": 2, "init": 3, "randomization": 4, "adversary": 5}


def rng_stream(seed: int, drop: int, purpose: str) -> np.random.Generator:
    """Independent counter-based stream for one (seed, drop, purpose)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(drop), _PURPOSES[purpose]))
    return np.random.Generator(np.random.Philox(ss))


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float) * 1000.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Simulation scenario; defaults follow the usual desk-scale setup."""

    nt: int = 4
    irs_elements: tuple[int, ...] = (6,)
    k: int = 4
    radius: float = 100.0
    fc: float = 2.4e9
    alpha_los: float = 2.1
    alpha_nlos: float = 4.0
    beta: float = 1.0
    sigma2: float = 1e-12
    gamma: float = float(db_to_linear(2.0))
    kappa: float = 0.0
    eps: float = 1e-5
    mu: float = 1e3
    robust_mu: float = 1.0
    seed: int = 0
    sector_deg: float = 120.0
    min_user_distance: float = 10.0
    ap_position: tuple[float, float] = (0.0, 0.0)
    irs_positions: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.nt < 1 or self.k < 1:
            raise ValueError("nt and k must be >= 1")
        if any(m < 0 for m in self.irs_elements):
            raise ValueError("IRS element counts must be >= 0")
        if self.gamma <= 0 or self.sigma2 <= 0:
            raise ValueError("gamma and sigma2 must be positive")
        if not 0 <= self.kappa < 1:
            raise ValueError("kappa must lie in [0, 1)")
        if not 0 < self.eps < 1 or self.mu <= 0 or self.robust_mu <= 0:
            raise ValueError("eps must lie in (0, 1) and penalty weights mu must be positive")
        if self.irs_positions is not None and len(self.irs_positions) != len(self.irs_elements):
            raise ValueError("one position per IRS required")
        if not 0 <= self.min_user_distance < self.radius:
            raise ValueError("min_user_distance must lie in [0, radius)")

    @property
    def m(self) -> int:
        return int(sum(self.irs_elements))

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.fc

    @property
    def path_loss_ref(self) -> float:
        """Reference loss L0 = (lambda / 4 pi)^2."""
        return (self.wavelength / (4 * np.pi)) ** 2

    @property
    def gammas(self) -> np.ndarray:
        return np.full(self.k, float(self.gamma))

    @property
    def sigma2s(self) -> np.ndarray:
        return np.full(self.k, float(self.sigma2))

    def irs_locations(self) -> np.ndarray:
        if self.irs_positions is not None:
            return np.asarray(self.irs_positions, dtype=float).reshape(-1, 2)
        n = len(self.irs_elements)
        half = np.deg2rad(self.sector_deg) / 2
        ang = -half + 2 * half * (np.arange(1, n + 1) / (n + 1))
        return np.asarray(self.ap_position) + self.radius * np.column_stack([np.cos(ang), np.sin(ang)])

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


@dataclass
class ChannelSet:
    """True channels of one drop.

    ``F`` is M x Nt (stacked AP->IRS blocks), ``h`` is K x M (row k is h_k),
    ``d`` is K x Nt (row k is d_k).
    """

    F: np.ndarray
    h: np.ndarray
    d: np.ndarray
    irs_sizes: tuple[int, ...] = ()
    user_positions: np.ndarray | None = field(default=None, repr=False)

    @property
    def nt(self) -> int:
        return self.d.shape[1]

    @property
    def k(self) -> int:
        return self.d.shape[0]

    @property
    def m(self) -> int:
        return self.F.shape[0]

    @property
    def E(self) -> np.ndarray:
        """Cascaded channels diag(h_k^H) F, shape K x M x Nt."""
        return self.h.conj()[:, :, None] * self.F[None, :, :]

    @property
    def H(self) -> np.ndarray:
        """Effective channels [E_k^H, d_k], shape K x Nt x (M + 1)."""
        return effective_channels(self.E, self.d)

    def without_irs(self) -> "ChannelSet":
        return ChannelSet(
            np.zeros((0, self.nt), dtype=complex), np.zeros((self.k, 0), dtype=complex),
            self.d.copy(), (), self.user_positions,
        )


def effective_channels(E: np.ndarray, d: np.ndarray) -> np.ndarray:
    return np.concatenate([E.conj().transpose(0, 2, 1), d[:, :, None]], axis=2)


@dataclass
class ChannelEstimate:
    """Estimated cascaded/direct channels and their error radii."""

    Ebar: np.ndarray
    dbar: np.ndarray
    eps_E: np.ndarray
    eps_d: np.ndarray

    @property
    def k(self) -> int:
        return self.dbar.shape[0]

    @property
    def nt(self) -> int:
        return self.dbar.shape[1]

    @property
    def m(self) -> int:
        return self.Ebar.shape[1]

    @property
    def eps(self) -> np.ndarray:
        return np.sqrt(self.eps_E**2 + self.eps_d**2)

    @property
    def H(self) -> np.ndarray:
        return effective_channels(self.Ebar, self.dbar)

    @property
    def g(self) -> np.ndarray:
        """vec(Hbar_k) for every user, shape K x Nt(M+1)."""
        return self.H.transpose(0, 2, 1).reshape(self.k, -1)

    @property
    def kappa(self) -> np.ndarray:
        return self.eps / np.linalg.norm(self.H.reshape(self.k, -1), axis=1)

    def without_irs(self) -> "ChannelEstimate":
        return ChannelEstimate(
            np.zeros((self.k, 0, self.nt), dtype=complex), self.dbar.copy(),
            np.zeros(self.k), self.eps_d.copy(),
        )


def _ula(n: int, angle: float) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def _signed_angle(normal: np.ndarray, direction: np.ndarray) -> float:
    cross = normal[0] * direction[1] - normal[1] * direction[0]
    return float(np.arctan2(cross, normal @ direction))


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _distance(a, b) -> float:
    dist = float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
    if dist <= 0:
        raise ValueError("non-positive link distance")
    return max(dist, 1.0)


def place_users(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    half = np.deg2rad(cfg.sector_deg) / 2
    r0, r1 = cfg.min_user_distance, cfg.radius
    r = np.sqrt(rng.uniform(r0**2, r1**2, cfg.k))
    ang = rng.uniform(-half, half, cfg.k)
    return np.asarray(cfg.ap_position) + np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def generate_channels(cfg: ScenarioConfig, drop_index: int) -> ChannelSet:
    """Ricean AP->IRS and IRS->user links, Rayleigh direct links."""
    users = place_users(cfg, rng_stream(cfg.seed, drop_index, "placement"))
    rng = rng_stream(cfg.seed, drop_index, "channel")
    ap = np.asarray(cfg.ap_position, dtype=float)
    L0 = cfg.path_loss_ref
    los = np.sqrt(cfg.beta / (1 + cfg.beta))
    nlos = np.sqrt(1 / (1 + cfg.beta))
    ap_normal = np.array([1.0, 0.0])
    F_blocks, h_blocks = [], []
    for pos, ml in zip(cfg.irs_locations(), cfg.irs_elements):
        dl = _distance(ap, pos)
        irs_normal = (ap - pos) / np.linalg.norm(ap - pos)
        aod = _signed_angle(ap_normal, (pos - ap) / dl)
        aoa = _signed_angle(irs_normal, (ap - pos) / dl)
        F_los = np.outer(_ula(ml, aoa), _ula(cfg.nt, aod).conj())
        F_blocks.append(np.sqrt(L0 * dl**-cfg.alpha_los) * (los * F_los + nlos * _cn(rng, (ml, cfg.nt))))
        hk = np.empty((cfg.k, ml), dtype=complex)
        for k, u in enumerate(users):
            dk = _distance(pos, u)
            aod_k = _signed_angle(irs_normal, (u - pos) / dk)
            hk[k] = np.sqrt(L0 * dk**-cfg.alpha_los) * (los * _ula(ml, aod_k) + nlos * _cn(rng, ml))
        h_blocks.append(hk)
    F = np.vstack(F_blocks) if F_blocks else np.zeros((0, cfg.nt), dtype=complex)
    h = np.hstack(h_blocks) if h_blocks else np.zeros((cfg.k, 0), dtype=complex)
    dist = np.array([_distance(ap, u) for u in users])
    d = np.sqrt(L0 * dist**-cfg.alpha_nlos)[:, None] * _cn(rng, (cfg.k, cfg.nt))
    return ChannelSet(F, h, d, tuple(cfg.irs_elements), users)


def _uniform_in_ball(rng: np.random.Generator, shape) -> tuple[np.ndarray, float]:
    """Unit-norm complex direction and a radius fraction uniform in the ball."""
    u = _cn(rng, shape)
    u /= np.linalg.norm(u)
    n_real = 2 * int(np.prod(shape))
    return u, float(rng.uniform() ** (1.0 / n_real))


def _radius_for(X: np.ndarray, U: np.ndarray, rho: float, kappa: float) -> float:
    # eps = kappa * ||X - rho * eps * U||, solved for eps >= 0
    a = 1 - (kappa * rho) ** 2
    b = 2 * kappa**2 * rho * np.real(np.vdot(X, U))
    c = -(kappa**2) * np.linalg.norm(X) ** 2
    return float((-b + np.sqrt(b * b - 4 * a * c)) / (2 * a))


def degrade_csi(true: ChannelSet, kappa: float, rng: np.random.Generator) -> ChannelEstimate:
    """Estimate whose uncertainty ball of normalized radius ``kappa`` holds the truth.

    One error direction and radius fraction are drawn per user over the whole
    of ``[E_k^H, d_k]``, so for a fixed ``rng`` state the uncertainty balls
    obtained for increasing ``kappa`` are nested. The aggregate radius is
    split as eps_E : eps_d = ||Ebar_k||_F : ||dbar_k||_2.
    """
    if not 0 <= kappa < 1:
        raise ValueError("kappa must lie in [0, 1)")
    E, d = true.E, true.d
    K, M, Nt = E.shape
    Ebar, dbar = np.empty_like(E), np.empty_like(d)
    eps_E, eps_d = np.zeros(K), np.zeros(K)
    for k in range(K):
        X = np.concatenate([E[k].ravel(), d[k]])
        U, r = _uniform_in_ball(rng, X.shape)
        eps = _radius_for(X, U, r, kappa)
        Xbar = X - r * eps * U
        Ebar[k] = Xbar[: M * Nt].reshape(M, Nt)
        dbar[k] = Xbar[M * Nt:]
        nE, nd = np.linalg.norm(Ebar[k]), np.linalg.norm(dbar[k])
        total = np.hypot(nE, nd)
        if total > 0:
            eps_E[k], eps_d[k] = eps * nE / total, eps * nd / total
    return ChannelEstimate(Ebar, dbar, eps_E, eps_d)


def lifted_vector(phi: np.ndarray) -> np.ndarray:
    """v = [phi^T, 1]^H."""
    return np.concatenate([np.conj(phi), [1.0]])


def _H_of(channels) -> np.ndarray:
    return channels.H if hasattr(channels, "H") else np.asarray(channels)


def effective_gains(channels, phi: np.ndarray) -> np.ndarray:
    """Rows g_k^H = h_k^H Phi F + d_k^H, computed as (H_k v)^H."""
    H = _H_of(channels)
    v = lifted_vector(np.asarray(phi, dtype=complex))
    return np.einsum("kna,a->kn", H, v).conj()


def sinr(channels, w, phi, sigma2, k: int | None = None):
    """Received SINR of every user (or of user ``k``).

    ``w`` is Nt x K with column j the beamformer of user j; ``phi`` holds the
    M reflection coefficients; ``sigma2`` is a scalar or per-user array.
    """
    G = effective_gains(channels, phi)
    P = np.abs(G @ np.asarray(w)) ** 2
    sig = np.diag(P)
    interf = P.sum(axis=1) - sig
    out = sig / (interf + np.broadcast_to(np.asarray(sigma2, dtype=float), sig.shape))
    return out if k is None else float(out[k])


def sinr_lifted(channels, W: np.ndarray, V: np.ndarray, sigma2, k: int | None = None):
    """SINR through the trace form Tr(V H_k^H W_j H_k); ``W`` is K x Nt x Nt."""
    H = _H_of(channels)
    T = np.einsum("ab,kna,jnm,kmb->kj", V.T, H.conj(), W, H).real
    sig = np.diag(T)
    out = sig / (T.sum(axis=1) - sig + np.broadcast_to(np.asarray(sigma2, dtype=float), sig.shape))
    return out if k is None else float(out[k])


# ---- text dumps --------------------------------------------------------

def write_matrices(stream: IO[str], matrices: dict[str, np.ndarray]) -> None:
    """Write named complex arrays as dims plus row-major (re, im) pairs."""
    stream.write("# irsopt matrices v1\n")
    for name, arr in matrices.items():
        arr = np.asarray(arr, dtype=complex)
        shape = arr.shape if arr.ndim else (1,)
        stream.write(f"matrix {name} {' '.join(str(s) for s in shape)}\n")
        flat = arr.reshape(-1)
        if flat.size:
            stream.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in flat) + "\n")


def read_matrices(stream: IO[str]) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    lines = [ln for ln in stream.read().splitlines() if ln.strip() and not ln.startswith("#")]
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "matrix" or len(head) < 3:
            raise ValueError(f"line {i + 1}: expected 'matrix <name> <dims...>'")
        name, shape = head[1], tuple(int(s) for s in head[2:])
        n = int(np.prod(shape))
        if n == 0:
            out[name] = np.zeros(shape, dtype=complex)
            i += 1
            continue
        body = lines[i + 1].split() if i + 1 < len(lines) else []
        if len(body) != 2 * n:
            raise ValueError(f"matrix {name}: expected {2 * n} numbers, got {len(body)}")
        vals = np.array(body, dtype=float).reshape(-1, 2)
        out[name] = (vals[:, 0] + 1j * vals[:, 1]).reshape(shape)
        i += 2
    return out


def channels_to_dict(ch: ChannelSet) -> dict[str, np.ndarray]:
    return {"F": ch.F, "h": ch.h, "d": ch.d, "irs_sizes": np.asarray(ch.irs_sizes or (0,))}


def channels_from_dict(m: dict[str, np.ndarray]) -> ChannelSet:
    sizes = tuple(int(s.real) for s in m.get("irs_sizes", np.zeros(1)) if s.real > 0)
    return ChannelSet(m["F"], m["h"], m["d"], sizes)


def estimate_to_dict(est: ChannelEstimate) -> dict[str, np.ndarray]:
    return {"Ebar": est.Ebar, "dbar": est.dbar, "eps_E": est.eps_E, "eps_d": est.eps_d}


def estimate_from_dict(m: dict[str, np.ndarray]) -> ChannelEstimate:
    return ChannelEstimate(m["Ebar"], m["dbar"], m["eps_E"].real, m["eps_d"].real)


def check_phases(phi: Sequence[complex] | np.ndarray, m: int) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if phi.size != m:
        raise ValueError(f"expected {m} phase shifts, got {phi.size}")
    if not np.allclose(np.abs(phi), 1.0, atol=1e-9):
        raise ValueError("phase shifts must have unit modulus")
    return phi
