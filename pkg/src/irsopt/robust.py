"""Worst-case robust design for norm-bounded channel estimation errors.

User ``k``'s true effective channel is ``Hbar_k + dH_k`` with
``||dH_k||_F <= eps_k``. Writing ``g = vec(H)``, the SINR constraint
``gamma sigma^2 + Tr(V H^H Wt H) <= 0`` becomes the quadratic form
``g^H (V^T kron Wt) g``, and the S-procedure turns its worst case over the
ball into one linear matrix inequality per user::

    blkdiag(q I, -q eps^2 - gamma) - G^H (V^T kron Wt) G >= 0,   G = [I, g]

with a fresh multiplier ``q >= 0``. Everything here is in the same
normalized units as :mod:`irsopt.algorithms`, so channels, radii and
``gamma sigma^2`` are all divided by the user's noise standard deviation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.optimize import brentq

from . import conic
from .algorithms import (
    MAX_INNER, MAX_OUTER, RANDOMIZATION_DRAWS, BeamState, IterationRecord, Normalized,
    PhaseState, SolveTrace, initial_phase, _ms, _nominal_qos_fixed_v, _nominal_qos_fixed_w,
    _raise_for, min_slack, normalize, penalty_altmin_normalized, sdr_altmin_normalized,
    solve_w_step,
)
from .channels import ChannelEstimate, ScenarioConfig, rng_stream
from .conic import Affine, ConicProblem, inner, kron

MAX_LMI_DIM = 2000
VERIFY_TOL = 1e-5
INTERIOR_FRACTION = 0.1


@dataclass
class RobustConstraintSet:
    """Per-user S-procedure data of one subproblem (normalized units)."""

    G: list[np.ndarray] = field(default_factory=list)
    eps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    q: list[Affine | None] = field(default_factory=list)
    lmis: list[Affine | None] = field(default_factory=list)

    def multipliers(self, values: dict) -> np.ndarray:
        """Solved multipliers; users handled by the nominal constraint report NaN."""
        return np.array([float(values[f"q{k}"]) if q is not None else np.nan
                         for k, q in enumerate(self.q)])

    def constant_block(self, k: int, q: float) -> np.ndarray:
        n = self.G[k].shape[0]
        return np.diag(np.concatenate([np.full(n, q), [-q * self.eps[k] ** 2 - self.gamma[k]]]))


def lmi_dimension(nt: int, m: int) -> int:
    return nt * (m + 1) + 1


def check_lmi_size(nt: int, m: int) -> None:
    dim = lmi_dimension(nt, m)
    if dim > MAX_LMI_DIM:
        raise ValueError(
            f"robust LMI would have dimension Nt*(M+1)+1 = {dim} > {MAX_LMI_DIM}; "
            f"it grows with the product of antennas and elements, so reduce Nt={nt} "
            f"or M={m} (for example M <= {MAX_LMI_DIM // nt - 2} at this Nt)")


def scaled_radii(estimate: ChannelEstimate, S: Normalized, sigma2) -> np.ndarray:
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (S.k,))
    return estimate.eps * np.sqrt(S.p_ref / sigma2)


def build_robust_lmi(prob: ConicProblem, S: Normalized, eps: np.ndarray, Wt, V) -> RobustConstraintSet:
    """Add the per-user worst-case SINR constraints to ``prob``.

    ``Wt`` is the list of interference-weighted matrices and ``V`` the lifted
    phase matrix; exactly one of the two may be an :class:`Affine`
    expression. Users with a zero radius get the plain trace constraint,
    which is what the LMI tends to as its multiplier grows.
    """
    check_lmi_size(S.nt, S.m)
    eps = np.asarray(eps, dtype=float)
    n = S.nt * (S.m + 1)
    out = RobustConstraintSet(eps=eps, gamma=S.gamma)
    for k in range(S.k):
        Hk = S.H[k]
        g = Hk.T.reshape(-1)
        G = np.hstack([np.eye(n), g[:, None]])
        out.G.append(G)
        if eps[k] == 0:
            if isinstance(V, Affine):
                prob.add_le(S.gamma[k] + inner(Hk.conj().T @ Wt[k] @ Hk, V))
            else:
                prob.add_le(S.gamma[k] + inner(Hk @ V @ Hk.conj().T, Wt[k]))
            out.q.append(None)
            out.lmis.append(None)
            continue
        X = kron(V.T, Wt[k]) if isinstance(V, Affine) else kron(np.asarray(V).T, Wt[k])
        q = prob.scalar(f"q{k}")
        D = np.diag(np.concatenate([np.ones(n), [-eps[k] ** 2]]))
        const = np.zeros((n + 1, n + 1))
        const[n, n] = -S.gamma[k]
        lmi = q * D + const - G.conj().T @ X @ G
        lmi = (lmi + lmi.H) * 0.5
        prob.add_psd(lmi, name=f"robust SINR user {k}")
        out.q.append(q)
        out.lmis.append(lmi)
    return out


def _robust_qos_fixed_v(prob, S, Wt, V, *, eps):
    build_robust_lmi(prob, S, eps, Wt, V)


def _robust_qos_fixed_w(prob, S, Wt, Vb, *, eps):
    build_robust_lmi(prob, S, eps, list(Wt), Vb)


def _hooks(eps: np.ndarray):
    if np.all(eps == 0):
        return _nominal_qos_fixed_v, _nominal_qos_fixed_w, True
    return (partial(_robust_qos_fixed_v, eps=eps), partial(_robust_qos_fixed_w, eps=eps), False)


def robust_beamforming_fixed_phase(estimate: ChannelEstimate, gamma, sigma2, phase: PhaseState) -> BeamState:
    """Minimum-power beamformers that meet every target for all channels in the ball."""
    S = normalize(estimate, gamma, sigma2)
    if phase.m != S.m:
        raise ValueError(f"expected {S.m} phases, got {phase.m}")
    eps = scaled_radii(estimate, S, sigma2)
    qos_w, _, polish = _hooks(eps)
    w, ratios, status = solve_w_step(S, phase.v, qos_w, polish)
    if w is None:
        _raise_for(status, "robust beamforming")
    return BeamState(w * np.sqrt(S.p_ref), np.asarray(ratios))


def robust_penalty_altmin(estimate: ChannelEstimate, cfg: ScenarioConfig, *, drop: int = 0,
                          init: PhaseState | None = None, mu: float | None = None,
                          max_outer: int = MAX_OUTER, max_inner: int = MAX_INNER):
    """Penalty-based alternating design with the worst-case constraints.

    Same outer loop, stopping rule and descent bookkeeping as
    :func:`irsopt.algorithms.penalty_altmin`; both subproblems carry the
    S-procedure LMIs instead of the nominal SINR constraints. Robust
    beamformers are taken straight from the relaxation (the nominal power
    refinement does not apply to the worst case).
    """
    S = normalize(estimate, cfg.gammas, cfg.sigma2s)
    eps = scaled_radii(estimate, S, cfg.sigma2s)
    check_lmi_size(S.nt, S.m)
    phase = init if init is not None else initial_phase(cfg, S.m, drop)
    qos_w, qos_v, polish = _hooks(eps)
    if mu is None:
        # zero radii leave the nominal problem, so the nominal penalty weight applies
        mu = cfg.mu if polish else cfg.robust_mu
    return penalty_altmin_normalized(
        S, phase, mu, cfg.eps, max_outer=max_outer,
        max_inner=max_inner, qos_w=qos_w, qos_v=qos_v, polish=polish,
        name="robust-penalty-altmin")


def robust_sdr_altmin(estimate: ChannelEstimate, cfg: ScenarioConfig, *, drop: int = 0,
                      init: PhaseState | None = None, max_iter: int = MAX_OUTER,
                      draws: int = RANDOMIZATION_DRAWS):
    """Randomized alternating design whose subproblems carry the worst-case LMIs."""
    S = normalize(estimate, cfg.gammas, cfg.sigma2s)
    eps = scaled_radii(estimate, S, cfg.sigma2s)
    check_lmi_size(S.nt, S.m)
    phase = init if init is not None else initial_phase(cfg, S.m, drop)
    qos_w, qos_v, polish = _hooks(eps)
    return sdr_altmin_normalized(
        S, phase, rng_stream(cfg.seed, drop, "randomization"), max_iter, draws,
        qos_w=qos_w, qos_v=qos_v, polish=polish, name="robust-sdr-altmin")


def robust_fixed_phase_design(estimate: ChannelEstimate, cfg: ScenarioConfig, phase: PhaseState,
                              name: str = "robust-fixed-phase"):
    """Robust beamforming at given phases, packaged like the iterative designs."""
    t0 = time.perf_counter()
    S = normalize(estimate, cfg.gammas, cfg.sigma2s)
    beam = robust_beamforming_fixed_phase(estimate, cfg.gammas, cfg.sigma2s, phase)
    trace = SolveTrace(name)
    w = beam.w / np.sqrt(S.p_ref)
    trace.records.append(IterationRecord(
        0, beam.P, phase.rank_gap, float(np.max(beam.sdp_ratio)) if beam.sdp_ratio.size else 0.0,
        min_slack(S, w, phase.v), 0, conic.OPTIMAL, _ms(t0), "init"))
    return beam, phase, trace


# ---- adversarial verification -------------------------------------------

def _sinr_under(Hk: np.ndarray, w: np.ndarray, v: np.ndarray, k: int, sigma2: float) -> np.ndarray:
    """SINR of user ``k`` for a stack of channel matrices ``Hk`` (S x Nt x (M+1))."""
    g = np.einsum("snm,m->sn", Hk, v).conj()
    p = np.abs(g @ w) ** 2
    sig = p[:, k]
    return sig / (p.sum(axis=1) - sig + sigma2)


def worst_case_perturbation(Hbar: np.ndarray, X: np.ndarray, eps: float) -> np.ndarray:
    """Maximizer of (g + d)^H X (g + d) over ||d|| <= eps, with g = vec(Hbar).

    A trust-region subproblem solved through the eigen-decomposition of X and
    a scalar secular equation. Returned as an Nt x (M+1) matrix.
    """
    g = Hbar.T.reshape(-1)
    if eps <= 0:
        return np.zeros_like(Hbar)
    lam, Q = np.linalg.eigh(-(X + X.conj().T) / 2)  # minimize d^H A d + 2 Re(c^H d)
    c = Q.conj().T @ (-(X @ g))
    lo = max(0.0, -lam[0])

    def excess(t):
        return np.sqrt(np.sum(np.abs(c) ** 2 / (lam + t) ** 2)) - eps

    if lam[0] > 0 and excess(0.0) <= 0:
        y = -c / lam
    else:
        t0 = lo + 1e-12 * max(1.0, abs(lo))
        t = t0
        if excess(t0) > 0:
            hi = t0 + 1.0
            while excess(hi) > 0:
                hi = t0 + 2 * (hi - t0)
            t = brentq(excess, t0, hi, xtol=1e-14, rtol=1e-14)
        y = -c / (lam + t)
        short = eps**2 - np.sum(np.abs(y) ** 2)
        if short > 0:  # hard case: top up along the most negative direction
            y[0] += np.sqrt(short)
    d = Q @ y
    d *= min(1.0, eps / max(np.linalg.norm(d), 1e-300))
    n_cols = Hbar.shape[1]
    return d.reshape(n_cols, -1).T


def verify_worst_case(solution, estimate: ChannelEstimate, samples: int, rng: np.random.Generator,
                      *, gamma, sigma2, tol: float = VERIFY_TOL, adversary: bool = True):
    """Sampled worst-case check of a design against the uncertainty set.

    ``solution`` is ``(BeamState, PhaseState)``. For every user, ``samples``
    perturbations are drawn, 90% uniformly on the sphere ``||dH_k|| = eps_k``
    and 10% uniformly inside the ball; with ``adversary`` the exact
    worst-case perturbation of the user's quadratic form is added. Returns
    ``(min SINR slack, violation count)`` where a violation is a slack below
    ``-tol``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    beam, phase = solution
    w, v = beam.w, phase.v
    H, eps = estimate.H, estimate.eps
    K = H.shape[0]
    if w.shape != (H.shape[1], K) or v.shape[0] != H.shape[2]:
        raise ValueError(
            f"solution shapes w{w.shape}, v{v.shape} do not match estimate {H.shape}")
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,))
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (K,))
    n_interior = int(round(INTERIOR_FRACTION * samples))
    worst, violations = np.inf, 0
    for k in range(K):
        shape = (samples,) + H.shape[1:]
        D = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        D /= np.linalg.norm(D.reshape(samples, -1), axis=1)[:, None, None]
        radius = np.full(samples, eps[k])
        if n_interior:
            radius[:n_interior] *= rng.uniform(size=n_interior) ** (1.0 / (2 * D[0].size))
        stack = H[k][None] + radius[:, None, None] * D
        if adversary:
            W = np.einsum("nk,mk->knm", w, w.conj())
            Wt = gamma[k] * (W.sum(axis=0) - W[k]) - W[k]
            X = np.kron(np.outer(v, v.conj()).T, Wt)
            dH = worst_case_perturbation(H[k], X, eps[k])
            stack = np.concatenate([stack, (H[k] + dH)[None]])
        slack = _sinr_under(stack, w, v, k, sigma2[k]) - gamma[k]
        worst = min(worst, float(slack.min()))
        violations += int(np.sum(slack < -tol))
    return worst, violations
