import io

import numpy as np
import pytest

from irsopt import algorithms as alg
from irsopt.channels import ChannelSet, ScenarioConfig, generate_channels, sinr
from irsopt.errors import InfeasibleProblem
from irsopt.linalg import principal
from conftest import crandn, random_psd

SMALL = ScenarioConfig(nt=3, k=2, irs_elements=(3,))


@pytest.fixture(scope="module")
def small_channels():
    return generate_channels(SMALL, 0)


def _bare(d):
    K, Nt = d.shape
    return ChannelSet(np.zeros((0, Nt), complex), np.zeros((K, 0), complex), d)


def test_mrt_closed_form(rng):
    d = crandn(rng, 1, 4) * 1e-4
    beam = alg.beamforming_fixed_phase(_bare(d), 2.0, 1e-12, alg.PhaseState.zero(0))
    assert beam.P == pytest.approx(2.0 * 1e-12 / np.linalg.norm(d) ** 2, rel=1e-6)
    cos = abs(np.vdot(beam.w[:, 0], d[0])) / (np.linalg.norm(beam.w) * np.linalg.norm(d))
    assert cos == pytest.approx(1.0, abs=1e-9)


def test_orthogonal_users_decouple():
    d = np.array([[1, 0, 0], [0, 2j, 0]]) * 1e-4
    gamma, s2 = np.array([1.5, 3.0]), np.array([1e-12, 2e-12])
    beam = alg.beamforming_fixed_phase(_bare(d), gamma, s2, alg.PhaseState.zero(0))
    expected = np.sum(gamma * s2 / np.linalg.norm(d, axis=1) ** 2)
    assert beam.P == pytest.approx(expected, rel=1e-6)


def test_noise_scale_equivariance(small_channels):
    ph = alg.initial_phase(SMALL, 3, 0)
    p1 = alg.beamforming_fixed_phase(small_channels, SMALL.gammas, SMALL.sigma2s, ph).P
    p2 = alg.beamforming_fixed_phase(small_channels, SMALL.gammas, 2 * SMALL.sigma2s, ph).P
    assert p2 == pytest.approx(2 * p1, rel=1e-6)


def test_fixed_phase_solution_is_feasible_and_tight(small_channels):
    ph = alg.initial_phase(SMALL, 3, 0)
    beam = alg.beamforming_fixed_phase(small_channels, SMALL.gammas, SMALL.sigma2s, ph)
    s = sinr(small_channels, beam.w, ph.phi, SMALL.sigma2s)
    assert np.all(s >= SMALL.gammas - 1e-6)
    assert np.all(beam.sdp_ratio <= 1e-6)
    np.testing.assert_allclose(np.trace(beam.Wbar.sum(0)).real, 1.0, atol=1e-9)


def test_unreachable_targets_signal_infeasibility(small_channels):
    cfg = SMALL.with_(gamma=1e6)
    with pytest.raises(InfeasibleProblem):
        alg.penalty_altmin(generate_channels(cfg.with_(nt=1, k=3), 0), cfg.with_(nt=1, k=3))


def test_phase_state_containers(rng):
    ph = alg.PhaseState.random(4, rng)
    assert np.allclose(np.abs(ph.phi), 1) and ph.v[-1] == 1
    np.testing.assert_allclose(np.diag(ph.V).real, 1, atol=1e-12)
    back = alg.PhaseState.from_lifted(ph.v[:-1])
    np.testing.assert_allclose(back.phi, ph.phi, atol=1e-12)
    assert alg.initial_phase(SMALL, 4, 2).theta.tolist() == alg.initial_phase(SMALL, 4, 2).theta.tolist()


def test_taylor_bound_on_spectral_norm(rng):
    for _ in range(50):
        V0, V = random_psd(rng, 4), random_psd(rng, 4)
        lam0, u = principal(V0)
        lin = lam0 + (u.conj() @ (V - V0) @ u).real
        assert principal(V)[0] >= lin - 1e-9


def _wbar(channels, phase):
    beam = alg.beamforming_fixed_phase(channels, SMALL.gammas, SMALL.sigma2s, phase)
    return beam.Wbar, beam.P


def test_sca_fixed_point_at_rank_one_start(small_channels):
    ph = alg.initial_phase(SMALL, 3, 0)
    Wbar, P = _wbar(small_channels, ph)
    P_new, Vbar, objs = alg.sca_phase_update(
        Wbar, P, small_channels, 1e3, 1e-5, gamma=SMALL.gammas, sigma2=SMALL.sigma2s, phase=ph)
    assert objs[0] == pytest.approx(P, rel=1e-9)  # zero penalty at a rank-one start
    assert alg.rank_gap(Vbar / P_new) <= 1e-5
    assert all(b <= a * (1 + 1e-7) for a, b in zip(objs, objs[1:]))
    assert P_new <= P * (1 + 1e-7)


def test_sca_large_mu_lower_bounds_penalized_power(small_channels):
    ph = alg.initial_phase(SMALL, 3, 0)
    Wbar, P = _wbar(small_channels, ph)
    kw = dict(gamma=SMALL.gammas, sigma2=SMALL.sigma2s, phase=ph)
    p_relaxed, _, _ = alg.sca_phase_update(Wbar, P, small_channels, 1e6, 1e-5, max_inner=1, **kw)
    p_pen, _, _ = alg.sca_phase_update(Wbar, P, small_channels, 1.0, 1e-5, **kw)
    assert p_relaxed <= p_pen * (1 + 1e-6)


def test_sca_rejects_unnormalized_beams(small_channels):
    with pytest.raises(ValueError, match="unit total trace"):
        alg.sca_phase_update(np.stack([np.eye(3)] * 2), 1.0, small_channels, 1.0, 1e-5,
                             gamma=SMALL.gammas, sigma2=SMALL.sigma2s)


def test_penalty_altmin_contracts(small_channels):
    beam, phase, trace = alg.penalty_altmin(small_channels, SMALL)
    assert trace.is_nonincreasing() and trace.inner_nonincreasing()
    assert np.all(sinr(small_channels, beam.w, phase.phi, SMALL.sigma2s) >= SMALL.gammas - 1e-6)
    assert np.all(beam.sdp_ratio <= 1e-6)
    assert phase.rank_gap <= SMALL.eps
    assert trace.extras["mu"][0] == SMALL.mu
    assert beam.P == pytest.approx(trace.objectives[-1], rel=1e-9)
    init = alg.beamforming_fixed_phase(small_channels, SMALL.gammas, SMALL.sigma2s,
                                       alg.initial_phase(SMALL, 3, 0)).P
    assert beam.P <= init * (1 + 1e-7)


def test_trace_serialization(small_channels):
    _, _, trace = alg.penalty_altmin(small_channels, SMALL, max_outer=2)
    buf = io.StringIO()
    trace.write(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# algorithm=penalty-altmin")
    assert lines[1].split() == list(alg.SolveTrace.ROW_FIELDS)
    assert len(lines) == 2 + len(trace.records)


def test_ia_every_iterate_feasible_and_descending(small_channels):
    beam, phase, trace = alg.ia_solve(small_channels, SMALL)
    slacks = [r.min_sinr_slack for r in trace.records if np.isfinite(r.min_sinr_slack)]
    assert min(slacks) >= -1e-6 * SMALL.gamma
    assert trace.is_nonincreasing()
    assert np.all(sinr(small_channels, beam.w, phase.phi, SMALL.sigma2s) >= SMALL.gammas - 1e-6)


def test_ia_with_rank_cut_stays_put(small_channels):
    # from a rank-one start the linearized cut pins V, so only beamformers can improve
    init = alg.initial_phase(SMALL, 3, 0)
    beam, phase, _ = alg.ia_solve(small_channels, SMALL, keep_rank_cut=True, max_iter=5)
    np.testing.assert_allclose(phase.phi, init.phi, atol=1e-4)


def test_sdr_without_irs_is_one_beamforming_solve(rng):
    d = crandn(rng, 2, 3) * 1e-4
    cfg = SMALL.with_(irs_elements=(0,))
    beam, phase, trace = alg.sdr_altmin(_bare(d), cfg)
    ref = alg.beamforming_fixed_phase(_bare(d), cfg.gammas, cfg.sigma2s, alg.PhaseState.zero(0))
    assert trace.iterations == 0 and beam.P == pytest.approx(ref.P, rel=1e-9)


def test_sdr_altmin_reports_feasible_solution(small_channels):
    beam, phase, trace = alg.sdr_altmin(small_channels, SMALL, max_iter=3)
    assert len(trace.extras["draw_violation_rate"]) == 3
    assert np.all(sinr(small_channels, beam.w, phase.phi, SMALL.sigma2s) >= SMALL.gammas - 1e-6)


def test_sdr_constraint_matrices_match_sinr(small_channels, rng):
    w = crandn(rng, 3, 2) * 1e2
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    R, xi = alg.sdr_constraint_matrices(small_channels, w, SMALL.gammas, SMALL.sigma2s)
    v = np.concatenate([phi.conj(), [1.0]])
    s = sinr(small_channels, w, phi, SMALL.sigma2s)
    G = np.abs((np.einsum("kna,a->kn", small_channels.H, v).conj()) @ w) ** 2
    interf = G.sum(1) - np.diag(G) + SMALL.sigma2s
    lhs = np.array([(v.conj() @ R[k] @ v).real for k in range(2)])
    # Tr(R_k V) <= xi_k  <=>  signal - gamma * (interference + noise) >= 0
    np.testing.assert_allclose(xi - lhs, np.diag(G) - SMALL.gammas * interf, rtol=1e-9,
                               atol=1e-9 * np.abs(xi).max())
    assert np.all((xi - lhs >= 0) == (s >= SMALL.gammas))


def test_random_phase_design_is_single_solve(small_channels):
    beam, phase, trace = alg.random_phase_design(small_channels, SMALL)
    assert trace.iterations == 0
    np.testing.assert_allclose(phase.phi, alg.initial_phase(SMALL, 3, 0).phi)
