"""Joint beamforming and phase-shift design with perfect channel knowledge.

All solvers work internally in normalized units: user ``k``'s effective
channel is scaled by ``sqrt(p_ref) / sigma_k`` so that noise powers become 1
and a power of 1 corresponds to ``p_ref`` watts. Results are converted back
to watts before they leave this module.

Lifted phase vector convention: ``v = [conj(phi); 1]`` so that the effective
gain of user ``k`` is ``H_k v``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import IO, Callable

import numpy as np

from . import conic
from .channels import ScenarioConfig, rng_stream
from .conic import ConicProblem, extract_rank_one, gaussian_randomize, inner
from .errors import InfeasibleProblem, SolverFailure
from .linalg import principal

MAX_OUTER = 200
MAX_IA = 2000
MAX_INNER = 50
IA_RESTARTS = 5
RANDOMIZATION_DRAWS = 50
MU_FLOOR = 1e-3
MU_SHRINK = 10.0

CONVERGED = "converged"
MAX_ITERATIONS = "max-iterations"


# ---- state containers -------------------------------------------------

@dataclass
class BeamState:
    """Beamformers ``w`` (Nt x K, watts^0.5) and relaxation witnesses.

    ``sdp_ratio[k]`` is lambda_2 / lambda_1 of the relaxed W_k returned by the
    solver before rank-one extraction.
    """

    w: np.ndarray
    sdp_ratio: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def W(self) -> np.ndarray:
        return np.einsum("nk,mk->knm", self.w, self.w.conj())

    @property
    def P(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))

    @property
    def Wbar(self) -> np.ndarray:
        return self.W / self.P

    def scaled(self, factor: float) -> "BeamState":
        return BeamState(self.w * np.sqrt(factor), self.sdp_ratio.copy())


@dataclass
class PhaseState:
    """Reflection phases; ``rank_gap`` records how rank-one the source matrix was."""

    theta: np.ndarray
    rank_gap: float = 0.0

    @classmethod
    def from_phi(cls, phi, rank_gap: float = 0.0) -> "PhaseState":
        return cls(np.mod(np.angle(np.asarray(phi, dtype=complex)), 2 * np.pi), rank_gap)

    @classmethod
    def from_lifted(cls, v_head, rank_gap: float = 0.0) -> "PhaseState":
        """Build from the first M entries of a lifted vector ``[conj(phi); 1]``."""
        return cls.from_phi(np.conj(np.asarray(v_head, dtype=complex)), rank_gap)

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "PhaseState":
        return cls(rng.uniform(0.0, 2 * np.pi, m))

    @classmethod
    def zero(cls, m: int) -> "PhaseState":
        return cls(np.zeros(m))

    @property
    def m(self) -> int:
        return self.theta.size

    @property
    def phi(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @property
    def v(self) -> np.ndarray:
        return np.concatenate([np.exp(-1j * self.theta), [1.0 + 0j]])

    @property
    def V(self) -> np.ndarray:
        v = self.v
        return np.outer(v, v.conj())

    def Vbar(self, P: float) -> np.ndarray:
        return P * self.V


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    rank_gap_v: float = 0.0
    w_ratio: float = 0.0
    min_sinr_slack: float = float("nan")
    inner_iterations: int = 0
    status: str = conic.OPTIMAL
    millis: float = 0.0
    note: str = ""


@dataclass
class SolveTrace:
    """Per-iteration history of one algorithm run (objectives in watts)."""

    algorithm: str
    records: list[IterationRecord] = field(default_factory=list)
    status: str = CONVERGED
    restarts: int = 0
    inner: list[list[float]] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    ROW_FIELDS = ("iteration", "objective_W", "rank_gap_V", "w_ratio", "min_sinr_slack",
                  "inner_iterations", "status", "millis", "note")

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records if np.isfinite(r.objective)])

    @property
    def iterations(self) -> int:
        """Number of update iterations after initialization."""
        return max(len(self.records) - 1, 0)

    def is_nonincreasing(self, rel_slack: float = 1e-7) -> bool:
        obj = self.objectives
        return bool(np.all(obj[1:] <= obj[:-1] * (1 + rel_slack)))

    def inner_nonincreasing(self, rel_slack: float = 1e-7) -> bool:
        return all(
            np.all(np.diff(seq) <= rel_slack * np.abs(np.asarray(seq[:-1])))
            for seq in self.inner if len(seq) > 1
        )

    def to_rows(self) -> list[tuple]:
        return [
            (r.iteration, r.objective, r.rank_gap_v, r.w_ratio, r.min_sinr_slack,
             r.inner_iterations, r.status, f"{r.millis:.3f}", r.note)
            for r in self.records
        ]

    def write(self, stream: IO[str]) -> None:
        stream.write(f"# algorithm={self.algorithm} status={self.status} restarts={self.restarts}\n")
        stream.write(" ".join(self.ROW_FIELDS) + "\n")
        for row in self.to_rows():
            stream.write(" ".join(
                f"{x:.17g}" if isinstance(x, float) else (str(x) if x != "" else "-") for x in row
            ) + "\n")


# ---- normalization ----------------------------------------------------

@dataclass
class Normalized:
    """Channels rescaled so that noise powers are 1 and powers are O(1)."""

    H: np.ndarray
    gamma: np.ndarray
    p_ref: float

    @property
    def k(self) -> int:
        return self.H.shape[0]

    @property
    def nt(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[2] - 1


def _channel_matrix(channels) -> np.ndarray:
    H = channels.H if hasattr(channels, "H") else channels
    H = np.asarray(H, dtype=complex)
    if H.ndim != 3:
        raise ValueError(f"effective channels must be K x Nt x (M+1), got {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("channels contain non-finite entries")
    return H


def normalize(channels, gamma, sigma2) -> Normalized:
    H = _channel_matrix(channels)
    K = H.shape[0]
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,)).copy()
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (K,)).copy()
    if np.any(gamma <= 0) or np.any(sigma2 <= 0):
        raise ValueError("SINR targets and noise powers must be positive")
    gains = np.sum(np.abs(H) ** 2, axis=(1, 2))
    if np.any(gains <= 0):
        raise ValueError("a user has an all-zero channel")
    p_ref = float(np.sum(gamma * sigma2 / gains))
    Hn = H * (np.sqrt(p_ref / sigma2))[:, None, None]
    return Normalized(Hn, gamma, p_ref)


def interference_weighted(W: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """W~_k = gamma_k * sum_{j != k} W_j - W_k for stacked K x Nt x Nt input."""
    total = W.sum(axis=0)
    return gamma[:, None, None] * (total[None] - W) - W


def _sinr_scaled(S: Normalized, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    G = np.einsum("kna,a->kn", S.H, v).conj()
    P = np.abs(G @ w) ** 2
    sig = np.diag(P)
    return sig / (P.sum(axis=1) - sig + 1.0)


def min_slack(S: Normalized, w: np.ndarray, v: np.ndarray) -> float:
    return float(np.min(_sinr_scaled(S, w, v) - S.gamma))


def rank_gap(V: np.ndarray) -> float:
    """(n - lambda_max(V)) / n for a lifted matrix with unit diagonal."""
    n = V.shape[0]
    lam, _ = principal(V)
    return float(max(n - lam, 0.0) / n)


# ---- beamforming for fixed phases -------------------------------------

QosBuilder = Callable[[ConicProblem, Normalized, list, np.ndarray], None]


def _nominal_qos_fixed_v(prob: ConicProblem, S: Normalized, Wt: list, V: np.ndarray) -> None:
    for k in range(S.k):
        A = S.H[k] @ V @ S.H[k].conj().T
        prob.add_le(S.gamma[k] + inner(A, Wt[k]))


def _power_polish(S: Normalized, w: np.ndarray, v: np.ndarray) -> np.ndarray | None:
    """Re-solve the powers of fixed beam directions so every SINR equals its target."""
    norms = np.linalg.norm(w, axis=0)
    if np.any(norms <= 0):
        return None
    U = w / norms
    G = np.einsum("kna,a->kn", S.H, v).conj()
    C = np.abs(G @ U) ** 2
    A = -C.copy()
    np.fill_diagonal(A, np.diag(C) / S.gamma)
    try:
        p = np.linalg.solve(A, np.ones(S.k))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        return None
    return U * np.sqrt(p)


def solve_w_step(S: Normalized, v: np.ndarray, qos: QosBuilder = _nominal_qos_fixed_v,
                 polish: bool = True):
    """Minimum-power beamformers for the lifted phase vector ``v`` (normalized units).

    Returns ``(w, ratios, status)``; ``w`` is None unless the solve succeeded.
    """
    prob = ConicProblem()
    W = [prob.hermitian(S.nt, f"W{k}") for k in range(S.k)]
    total = W[0]
    for Wk in W[1:]:
        total = total + Wk
    Wt = [S.gamma[k] * (total - W[k]) - W[k] for k in range(S.k)]
    prob.minimize(total.trace().real)
    qos(prob, S, Wt, np.outer(v, v.conj()))
    status, values = conic.solve(prob)
    if not status.ok:
        return None, None, status
    w = np.empty((S.nt, S.k), dtype=complex)
    ratios = np.empty(S.k)
    for k in range(S.k):
        r1 = extract_rank_one(values[f"W{k}"])
        w[:, k], ratios[k] = r1.vector, r1.ratio
    if polish:
        refined = _power_polish(S, w, v)
        if refined is not None:
            w = refined
    return w, ratios, status


def _raise_for(status, what: str):
    if status.status == conic.INFEASIBLE:
        raise InfeasibleProblem(f"{what}: SINR targets unreachable ({status.solver_status})")
    raise SolverFailure(f"{what}: {status.message or status.solver_status}")


def beamforming_fixed_phase(channels, gamma, sigma2, phase: PhaseState) -> BeamState:
    """Minimum-power beamformers for fixed reflection phases.

    Solved as the semidefinite relaxation of the SINR-constrained problem;
    the relaxation is tight, and the extracted beamformers are refined so
    that every SINR sits on its target.
    """
    S = normalize(channels, gamma, sigma2)
    if phase.m != S.m:
        raise ValueError(f"expected {S.m} phases, got {phase.m}")
    w, ratios, status = solve_w_step(S, phase.v)
    if w is None:
        _raise_for(status, "beamforming")
    return BeamState(w * np.sqrt(S.p_ref), ratios)


# ---- penalty-based phase update ----------------------------------------

@dataclass
class ScaResult:
    P: float
    Vbar: np.ndarray
    objectives: list[float]
    rank_gap: float
    iterations: int
    status: str


def penalized_objective(P: float, Vbar: np.ndarray, mu: float) -> float:
    lam, _ = principal(Vbar)
    return float(P + (np.trace(Vbar).real - lam) / mu)


def _nominal_qos_fixed_w(prob: ConicProblem, S: Normalized, Wt: np.ndarray, Vb) -> None:
    for k in range(S.k):
        B = S.H[k].conj().T @ Wt[k] @ S.H[k]
        prob.add_le(S.gamma[k] + inner(B, Vb))


def run_sca(S: Normalized, Wbar: np.ndarray, Vbar0: np.ndarray, mu: float, eps: float,
            max_inner: int = MAX_INNER, qos=_nominal_qos_fixed_w) -> ScaResult:
    """Iterate the convexified penalty problem from ``Vbar0`` (normalized units)."""
    n = S.m + 1
    Wt = interference_weighted(Wbar, S.gamma)
    Vt = Vbar0
    P_t = float(np.mean(np.diag(Vbar0).real))
    objectives = [penalized_objective(P_t, Vt, mu)]
    gap = rank_gap(Vt / P_t)
    status = conic.OPTIMAL
    it = 0
    while it < max_inner:
        _, u = principal(Vt)
        prob = ConicProblem()
        Vb = prob.hermitian(n, "Vbar")
        P = prob.scalar("P")
        prob.minimize(P + (Vb.trace().real - inner(np.outer(u, u.conj()), Vb)) / mu)
        prob.add_eq(Vb.diag().real - P * np.ones(n))
        qos(prob, S, Wt, Vb)
        st, values = conic.solve(prob)
        it += 1
        if not st.ok:
            status = st.status
            break
        P_new, V_new = float(values["P"]), values["Vbar"]
        obj = penalized_objective(P_new, V_new, mu)
        if obj > objectives[-1] * (1 + 1e-9):
            # the surrogate guarantees descent; a rise is solver noise near the fixed point
            status = conic.OPTIMAL
            break
        Vt, P_t = V_new, P_new
        objectives.append(obj)
        gap = rank_gap(Vt / P_t)
        if gap <= eps:
            break
    else:
        status = MAX_ITERATIONS
    return ScaResult(P_t, Vt, objectives, gap, it, status)


def sca_phase_update(Wbar, P_init: float, channels, mu: float, eps: float, *, gamma, sigma2,
                     phase: PhaseState | None = None, Vbar_init=None, max_inner: int = MAX_INNER,
                     rng: np.random.Generator | None = None):
    """Penalty-based update of the P-scaled lifted phase matrix for fixed W̄.

    Starts from ``Vbar_init`` (watts), from ``P_init`` times the lifted matrix
    of ``phase``, or from random phases. Returns ``(P, Vbar, objectives)`` in
    watts, where ``objectives`` is the penalized inner objective sequence.
    """
    S = normalize(channels, gamma, sigma2)
    Wbar = np.asarray(Wbar, dtype=complex)
    if not np.isclose(np.trace(Wbar.sum(axis=0)).real, 1.0, atol=1e-9):
        raise ValueError("normalized beamformers must have unit total trace")
    if Vbar_init is not None:
        V0 = np.asarray(Vbar_init, dtype=complex) / S.p_ref
    else:
        if phase is None:
            phase = PhaseState.random(S.m, rng or np.random.default_rng())
        V0 = phase.Vbar(P_init / S.p_ref)
    res = run_sca(S, Wbar, V0, mu, eps, max_inner)
    return res.P * S.p_ref, res.Vbar * S.p_ref, [o * S.p_ref for o in res.objectives]


# ---- outer loops ----------------------------------------------------------

def initial_phase(cfg: ScenarioConfig, m: int, drop: int, attempt: int = 0) -> PhaseState:
    """Random starting phases shared by every design on a drop (restart ``attempt``)."""
    rng = rng_stream(cfg.seed, drop, "init")
    for _ in range(attempt):
        rng.uniform(0.0, 2 * np.pi, m)
    return PhaseState.random(m, rng)


def _wstep_or_raise(S: Normalized, phase: PhaseState, qos=_nominal_qos_fixed_v, polish=True):
    w, ratios, st = solve_w_step(S, phase.v, qos, polish)
    if w is None:
        _raise_for(st, "initial beamforming")
    return w, ratios


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1e3


def _finish(S: Normalized, w: np.ndarray, ratios, phase: PhaseState) -> BeamState:
    return BeamState(w * np.sqrt(S.p_ref), np.asarray(ratios))


def penalty_altmin_normalized(S: Normalized, phase: PhaseState, mu: float, eps: float, *,
                              max_outer: int = MAX_OUTER, max_inner: int = MAX_INNER,
                              mu_floor: float = MU_FLOOR, qos_w=_nominal_qos_fixed_v,
                              qos_v=_nominal_qos_fixed_w, polish: bool = True,
                              name: str = "penalty-altmin"):
    """Shared outer loop for the nominal and robust penalty designs.

    A phase update is accepted only when its inner loop reached the rank-gap
    tolerance ``eps`` and the re-optimized beamformers do not need more power.
    Otherwise ``mu`` is divided by ``MU_SHRINK`` (a heavier rank penalty) and
    the update is retried from the same iterate. The run stops when the
    relative power decrease falls to ``eps``, when an update fails at
    ``mu_floor``, or after ``max_outer`` attempts.
    """
    trace = SolveTrace(name)
    t0 = time.perf_counter()
    w, ratios = _wstep_or_raise(S, phase, qos_w, polish)
    P = float(np.sum(np.abs(w) ** 2))
    trace.records.append(IterationRecord(
        0, P * S.p_ref, phase.rank_gap, float(np.max(ratios)), min_slack(S, w, phase.v), 0,
        conic.OPTIMAL, _ms(t0), "init"))
    trace.extras["mu"] = [mu]
    if S.m == 0:
        return _finish(S, w, ratios, phase), phase, trace
    mu_t = mu
    trace.status = MAX_ITERATIONS

    def keep(t, inner_its, status, note):
        trace.records.append(IterationRecord(
            t, P * S.p_ref, phase.rank_gap, float(np.max(ratios)), min_slack(S, w, phase.v),
            inner_its, status, _ms(t0), note))

    for t in range(1, max_outer + 1):
        t0 = time.perf_counter()
        W = np.einsum("nk,mk->knm", w, w.conj())
        sca = run_sca(S, W / P, phase.Vbar(P), mu_t, eps, max_inner, qos_v)
        trace.inner.append([o * S.p_ref for o in sca.objectives])
        if len(sca.objectives) == 1 and sca.status == conic.OPTIMAL:
            keep(t, sca.iterations, sca.status, "phase update made no progress")
            trace.status = CONVERGED
            break
        reason, status = None, sca.status
        if sca.status not in (conic.OPTIMAL, MAX_ITERATIONS):
            reason = f"phase update failed ({sca.status})"
        elif sca.rank_gap > eps:
            reason = f"rank gap {sca.rank_gap:.1e} left after {sca.iterations} inner iterations"
        else:
            lifted = extract_rank_one(sca.Vbar / sca.P, "phase")
            candidate = PhaseState.from_lifted(lifted.vector, sca.rank_gap)
            w_new, r_new, st = solve_w_step(S, candidate.v, qos_w, polish)
            status = st.status
            if w_new is None:
                reason = f"beamforming failed ({st.status})"
            else:
                P_new = float(np.sum(np.abs(w_new) ** 2))
                if P_new > P * (1 + 1e-9):
                    reason = f"power would rise by {(P_new - P) / P:.2e} relative"
        if reason is not None:
            if mu_t / MU_SHRINK < mu_floor * (1 - 1e-12):
                keep(t, sca.iterations, status, f"{reason} at mu={mu_t:g}; stopped")
                trace.status = CONVERGED
                break
            keep(t, sca.iterations, status, f"{reason} at mu={mu_t:g}; retrying")
            mu_t /= MU_SHRINK
            trace.extras["mu"].append(mu_t)
            continue
        rel = (P - P_new) / P_new
        w, ratios, phase, P = w_new, r_new, candidate, P_new
        trace.records.append(IterationRecord(
            t, P * S.p_ref, sca.rank_gap, float(np.max(ratios)), min_slack(S, w, phase.v),
            sca.iterations, sca.status, _ms(t0)))
        if rel <= eps:
            trace.status = CONVERGED
            break
    return _finish(S, w, ratios, phase), phase, trace


def penalty_altmin(channels, cfg: ScenarioConfig, *, drop: int = 0, init: PhaseState | None = None,
                   mu: float | None = None, max_outer: int = MAX_OUTER,
                   max_inner: int = MAX_INNER):
    """Alternate minimum-power beamforming with the penalized phase update.

    Returns ``(BeamState, PhaseState, SolveTrace)``. The first beamforming
    solve raises :class:`InfeasibleProblem` if the targets cannot be met at
    the initial phases; later failures end the run with the best iterate.
    """
    S = normalize(channels, cfg.gammas, cfg.sigma2s)
    phase = init if init is not None else initial_phase(cfg, S.m, drop)
    return penalty_altmin_normalized(
        S, phase, cfg.mu if mu is None else mu, cfg.eps,
        max_outer=max_outer, max_inner=max_inner)


# ---- inner approximation ----------------------------------------------

def _ia_problem(S: Normalized, Wt_prev: np.ndarray, V_prev: np.ndarray, keep_rank_cut: bool):
    n = S.m + 1
    prob = ConicProblem()
    W = [prob.hermitian(S.nt, f"W{k}") for k in range(S.k)]
    V = prob.hermitian(n, "V")
    total = W[0]
    for Wk in W[1:]:
        total = total + Wk
    prob.minimize(total.trace().real)
    prob.add_eq(V.diag().real - np.ones(n))
    for k in range(S.k):
        Hk = S.H[k]
        Wt = S.gamma[k] * (total - W[k]) - W[k]
        HVH = Hk @ V @ Hk.conj().T
        A_prev = Hk @ V_prev @ Hk.conj().T
        nW = np.linalg.norm(Wt_prev[k])
        nA = np.linalg.norm(A_prev)
        # balance the two halves of the split; the identity holds for any a > 0
        a2 = nA / nW if nW > 0 and nA > 0 else 1.0
        a = np.sqrt(a2)
        y = Wt * a + HVH / a
        G = Hk.conj().T @ A_prev @ Hk
        bound = (inner(G, V) / a2 + inner(Wt_prev[k], Wt) * a2
                 - S.gamma[k] - 0.5 * nA**2 / a2 - 0.5 * nW**2 * a2)
        prob.add_half_sq_le(y, bound)
    if keep_rank_cut:
        _, u = principal(V_prev)
        lam = np.linalg.eigvalsh(V_prev)[-1]
        prob.add_le(V.trace().real - inner(np.outer(u, u.conj()), V - V_prev) - lam)
    return prob


def ia_solve(channels, cfg: ScenarioConfig, *, drop: int = 0, init: PhaseState | None = None,
             keep_rank_cut: bool = False, max_iter: int = MAX_IA, restarts: int = IA_RESTARTS):
    """Inner-approximation design updating beamformers and phases jointly.

    Each iteration replaces the bilinear SINR constraint by a convex subset
    that touches it at the current point, so every iterate stays feasible and
    the power never increases. With ``keep_rank_cut`` the linearized
    rank-one cut on V is added; from a rank-one start that cut pins V to its
    initial value, so it is off by default.
    """
    S = normalize(channels, cfg.gammas, cfg.sigma2s)
    trace = SolveTrace("ia")
    attempt = 0
    while True:
        phase = init if (init is not None and attempt == 0) else initial_phase(cfg, S.m, drop, attempt)
        try:
            result = _ia_run(S, phase, cfg.eps, keep_rank_cut, max_iter, trace)
        except (InfeasibleProblem, SolverFailure):
            if attempt >= restarts:
                raise
            attempt += 1
            trace.restarts = attempt
            trace.records.clear()
            continue
        return result


def _ia_run(S: Normalized, phase: PhaseState, eps: float, keep_rank_cut: bool, max_iter: int,
            trace: SolveTrace):
    t0 = time.perf_counter()
    w, ratios = _wstep_or_raise(S, phase)
    P = float(np.sum(np.abs(w) ** 2))
    trace.records.append(IterationRecord(
        0, P * S.p_ref, 0.0, float(np.max(ratios)), min_slack(S, w, phase.v), 0,
        conic.OPTIMAL, _ms(t0), "init"))
    if S.m == 0:
        trace.status = CONVERGED
        return _finish(S, w, ratios, phase), phase, trace
    Wm = np.einsum("nk,mk->knm", w, w.conj())
    V = phase.V
    trace.status = MAX_ITERATIONS
    for t in range(1, max_iter + 1):
        t0 = time.perf_counter()
        prob = _ia_problem(S, interference_weighted(Wm, S.gamma), V, keep_rank_cut)
        st, values = conic.solve(prob)
        if not st.ok:
            if t == 1:
                _raise_for(st, "inner approximation")
            trace.records.append(IterationRecord(
                t, P * S.p_ref, rank_gap(V), float(np.max(ratios)), float("nan"), 1,
                st.status, _ms(t0), "solve failed; kept previous iterate"))
            trace.status = st.status
            break
        Wm_new = np.stack([values[f"W{k}"] for k in range(S.k)])
        P_new = float(sum(np.trace(Wk).real for Wk in Wm_new))
        if P_new > P * (1 + 1e-9):
            trace.records.append(IterationRecord(
                t, P * S.p_ref, rank_gap(V), float(np.max(ratios)), float("nan"), 1,
                st.status, _ms(t0), "rejected ascent step"))
            trace.status = CONVERGED
            break
        rel = (P - P_new) / P_new
        Wm, V, P = Wm_new, values["V"], P_new
        r1 = [extract_rank_one(Wk) for Wk in Wm]
        ratios = np.array([r.ratio for r in r1])
        w = np.column_stack([r.vector for r in r1])
        v_now = np.concatenate([extract_rank_one(V, "phase").vector, [1.0]])
        trace.records.append(IterationRecord(
            t, P * S.p_ref, rank_gap(V), float(np.max(ratios)), min_slack(S, w, v_now), 1,
            st.status, _ms(t0)))
        if rel <= eps:
            trace.status = CONVERGED
            break
    final_gap = rank_gap(V)
    phase = PhaseState.from_lifted(extract_rank_one(V, "phase").vector, final_gap)
    # beamformers re-optimized at the recovered phases
    w_fin, r_fin, st = solve_w_step(S, phase.v)
    if w_fin is None:
        _raise_for(st, "final beamforming")
    trace.extras["relaxed_power"] = P * S.p_ref
    trace.extras["final_power"] = float(np.sum(np.abs(w_fin) ** 2)) * S.p_ref
    return _finish(S, w_fin, r_fin, phase), phase, trace


# ---- SDR-based alternating baseline -------------------------------------

def _feasibility_problem(S: Normalized, W: np.ndarray, qos=_nominal_qos_fixed_w) -> ConicProblem:
    n = S.m + 1
    prob = ConicProblem()
    V = prob.hermitian(n, "V")
    prob.minimize(V.trace().real * 0.0)
    prob.add_eq(V.diag().real - np.ones(n))
    qos(prob, S, interference_weighted(W, S.gamma), V)
    return prob


def sdr_constraint_matrices(channels, w: np.ndarray, gamma, sigma2):
    """Per-user ``(R_k, xi_k)`` of the phase feasibility test Tr(R_k V) <= xi_k.

    Built from the cascaded blocks T_{k,j}, whose bottom-right entry is zero
    and whose direct-link powers are moved into ``xi_k``.
    """
    E, d = channels.E, channels.d
    K = d.shape[0]
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,))
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (K,))
    R, xi = [], np.empty(K)
    for k in range(K):
        Rk = np.zeros((E.shape[1] + 1,) * 2, dtype=complex)
        pw = np.abs(d[k].conj() @ w) ** 2
        for j in range(K):
            a = E[k] @ w[:, j]
            b = d[k].conj() @ w[:, j]
            T = np.zeros_like(Rk)
            T[:-1, :-1] = np.outer(a, a.conj())
            T[:-1, -1] = a * np.conj(b)
            T[-1, :-1] = np.conj(T[:-1, -1])
            Rk += (-T if j == k else gamma[k] * T)
        R.append(Rk)
        xi[k] = pw[k] - gamma[k] * (sigma2[k] + pw.sum() - pw[k])
    return np.stack(R), xi


def sdr_altmin(channels, cfg: ScenarioConfig, *, drop: int = 0, init: PhaseState | None = None,
               max_iter: int = MAX_OUTER, draws: int = RANDOMIZATION_DRAWS):
    """Alternating design with a relaxed phase feasibility test and randomization.

    Each iteration solves the feasibility SDP over V for the current
    beamformers, draws ``draws`` Gaussian candidates, keeps the one with the
    largest worst-user SINR slack (even if negative) and re-optimizes the
    beamformers at those phases. There is no descent guarantee; the last
    iterate is reported. ``trace.extras['draw_violation_rate']`` holds, per
    iteration, the fraction of raw draws that break some user's target.
    """
    S = normalize(channels, cfg.gammas, cfg.sigma2s)
    phase = init if init is not None else initial_phase(cfg, S.m, drop)
    rng = rng_stream(cfg.seed, drop, "randomization")
    return sdr_altmin_normalized(S, phase, rng, max_iter, draws)


def sdr_altmin_normalized(S: Normalized, phase: PhaseState, rng: np.random.Generator,
                          max_iter: int, draws: int, *, qos_w=_nominal_qos_fixed_v,
                          qos_v=_nominal_qos_fixed_w, polish: bool = True,
                          name: str = "sdr-altmin"):
    """Shared loop of the nominal and robust randomized alternating designs.

    Draws are ranked by their worst nominal SINR slack at the current
    beamformers, then by interference power.
    """
    trace = SolveTrace(name)
    t0 = time.perf_counter()
    w, ratios = _wstep_or_raise(S, phase, qos_w, polish)
    trace.records.append(IterationRecord(
        0, float(np.sum(np.abs(w) ** 2)) * S.p_ref, 0.0, float(np.max(ratios)),
        min_slack(S, w, phase.v), 0, conic.OPTIMAL, _ms(t0), "init"))
    violation_rates: list[float] = []
    trace.extras["draw_violation_rate"] = violation_rates
    trace.status = CONVERGED
    if S.m == 0:
        return _finish(S, w, ratios, phase), phase, trace
    for t in range(1, max_iter + 1):
        t0 = time.perf_counter()
        W = np.einsum("nk,mk->knm", w, w.conj())
        st, values = conic.solve(_feasibility_problem(S, W, qos_v))
        if not st.ok:
            trace.records.append(IterationRecord(
                t, trace.records[-1].objective, 0.0, float(np.max(ratios)), min_slack(S, w, phase.v),
                1, st.status, _ms(t0), "feasibility test failed; phases kept"))
            continue
        V = values["V"]
        best, best_key, violated = None, None, 0
        for head in gaussian_randomize(V, draws, rng):
            cand = PhaseState.from_lifted(head)
            sinr = _sinr_scaled(S, w, cand.v)
            slack = float(np.min(sinr - S.gamma))
            violated += slack < 0
            G = np.einsum("kna,a->kn", S.H, cand.v).conj()
            P_rx = np.abs(G @ w) ** 2
            key = (slack, -float(P_rx.sum() - np.trace(P_rx)))
            if best_key is None or key > best_key:
                best, best_key = cand, key
        violation_rates.append(violated / draws)
        w_new, r_new, st = solve_w_step(S, best.v, qos_w, polish)
        if w_new is None:
            trace.records.append(IterationRecord(
                t, trace.records[-1].objective, rank_gap(V), float(np.max(ratios)),
                min_slack(S, w, phase.v), 1, st.status, _ms(t0), "beamforming failed; phases kept"))
            continue
        w, ratios, phase = w_new, r_new, best
        trace.records.append(IterationRecord(
            t, float(np.sum(np.abs(w) ** 2)) * S.p_ref, rank_gap(V), float(np.max(ratios)),
            min_slack(S, w, phase.v), 1, st.status, _ms(t0),
            "" if best_key[0] >= 0 else "no feasible draw"))
    return _finish(S, w, ratios, phase), phase, trace


def random_phase_design(channels, cfg: ScenarioConfig, *, drop: int = 0,
                        init: PhaseState | None = None):
    """Minimum-power beamforming at the initial random phases."""
    S = normalize(channels, cfg.gammas, cfg.sigma2s)
    phase = init if init is not None else initial_phase(cfg, S.m, drop)
    t0 = time.perf_counter()
    w, ratios = _wstep_or_raise(S, phase)
    trace = SolveTrace("baseline2-random-phase")
    trace.records.append(IterationRecord(
        0, float(np.sum(np.abs(w) ** 2)) * S.p_ref, 0.0, float(np.max(ratios)),
        min_slack(S, w, phase.v), 0, conic.OPTIMAL, _ms(t0), "init"))
    return _finish(S, w, ratios, phase), phase, trace
