import numpy as np
import pytest

from irsopt import algorithms as alg
from irsopt import robust
from irsopt.channels import ChannelEstimate, ScenarioConfig, degrade_csi, generate_channels, rng_stream
from irsopt.conic import ConicProblem, solve
from irsopt.linalg import kron_vec_identity_check, vec
from conftest import crandn

TINY = ScenarioConfig(nt=2, k=2, irs_elements=(2,), gamma=1.0)


def _estimate(kappa, drop=0, cfg=TINY):
    ch = generate_channels(cfg, drop)
    return ch, degrade_csi(ch, kappa, rng_stream(cfg.seed, drop, "csi"))


def test_lmi_size_guard():
    assert robust.lmi_dimension(4, 6) == 29
    robust.check_lmi_size(4, 400)
    with pytest.raises(ValueError, match="reduce"):
        robust.check_lmi_size(10, 200)


def test_zero_radius_matches_nominal_beamforming():
    ch, est = _estimate(0.0)
    ph = alg.initial_phase(TINY, 2, 0)
    nominal = alg.beamforming_fixed_phase(ch, TINY.gammas, TINY.sigma2s, ph).P
    rob = robust.robust_beamforming_fixed_phase(est, TINY.gammas, TINY.sigma2s, ph).P
    assert rob == pytest.approx(nominal, rel=1e-5)


def test_tiny_radius_lmi_approaches_nominal():
    # the LMI path itself (not the zero-radius shortcut) converges to the nominal power
    ch, est = _estimate(0.0)
    est = ChannelEstimate(est.Ebar, est.dbar, np.full(2, 1e-9) * np.abs(est.Ebar).max(), np.zeros(2))
    ph = alg.initial_phase(TINY, 2, 0)
    nominal = alg.beamforming_fixed_phase(ch, TINY.gammas, TINY.sigma2s, ph).P
    rob = robust.robust_beamforming_fixed_phase(est, TINY.gammas, TINY.sigma2s, ph)
    assert rob.P == pytest.approx(nominal, rel=1e-4)
    assert np.all(rob.sdp_ratio <= 1e-6)


def test_constant_block_structure():
    ch, est = _estimate(0.1)
    S = alg.normalize(est, TINY.gammas, TINY.sigma2s)
    eps = robust.scaled_radii(est, S, TINY.sigma2s)
    prob = ConicProblem()
    W = [prob.hermitian(2, f"W{k}") for k in range(2)]
    Wt = [TINY.gamma * (W[1 - k]) - W[k] for k in range(2)]
    rs = robust.build_robust_lmi(prob, S, eps, Wt, alg.initial_phase(TINY, 2, 0).V)
    block = rs.constant_block(0, 2.0)
    n = 2 * 3
    np.testing.assert_allclose(np.diag(block)[:n], 2.0)
    assert block[n, n] == pytest.approx(-2.0 * eps[0] ** 2 - TINY.gamma)
    assert len(rs.lmis) == 2 and all(l is not None for l in rs.lmis)


def test_vectorization_consistency(rng):
    ch, est = _estimate(0.1)
    H = est.H[0]
    g = est.g[0]
    np.testing.assert_array_equal(g, vec(H))
    v = alg.initial_phase(TINY, 2, 0).v
    V = np.outer(v, v.conj())
    Wt = crandn(rng, 2, 2)
    Wt = Wt + Wt.conj().T
    direct = np.trace(V @ H.conj().T @ Wt @ H)
    lifted = g.conj() @ np.kron(V.T, Wt) @ g
    assert abs(direct - lifted) <= 1e-9 * abs(direct)
    assert kron_vec_identity_check(H, Wt, H, V) <= 1e-12 * np.abs(H).max() ** 2


def test_single_user_sign_bookkeeping():
    cfg = ScenarioConfig(nt=2, k=1, irs_elements=(2,), gamma=1.0)
    ch, est = _estimate(0.1, cfg=cfg)
    ph = alg.initial_phase(cfg, 2, 0)
    beam = robust.robust_beamforming_fixed_phase(est, cfg.gammas, cfg.sigma2s, ph)
    # W~ = -W: the worst-case signal power must still reach gamma * sigma^2
    w = beam.w[:, 0]
    Hbar = est.H[0]
    X = -np.kron(ph.V.T, np.outer(w, w.conj()))
    dH = robust.worst_case_perturbation(Hbar, X, est.eps[0])
    g = ((Hbar + dH) @ ph.v).conj()
    assert abs(g @ w) ** 2 >= cfg.gamma * cfg.sigma2 * (1 - 1e-5)
    assert np.linalg.norm(dH) == pytest.approx(est.eps[0], rel=1e-9)


def test_worst_case_perturbation_beats_sampling(rng):
    Hbar = crandn(rng, 2, 3)
    A = crandn(rng, 6, 6)
    X = A + A.conj().T
    g = vec(Hbar)
    dH = robust.worst_case_perturbation(Hbar, X, 0.3)
    best = ((g + vec(dH)).conj() @ X @ (g + vec(dH))).real
    for _ in range(2000):
        d = crandn(rng, 6)
        d *= 0.3 * rng.uniform() ** (1 / 12) / np.linalg.norm(d)
        assert ((g + d).conj() @ X @ (g + d)).real <= best + 1e-9


def test_small_instance_passes_adversarial_check():
    ch, est = _estimate(0.1)
    beam, phase, trace = robust.robust_penalty_altmin(est, TINY, max_outer=5)
    slack, violations = robust.verify_worst_case(
        (beam, phase), est, 1000, rng_stream(0, 0, "adversary"), gamma=TINY.gammas, sigma2=TINY.sigma2s)
    assert violations == 0 and slack >= -1e-5
    assert trace.is_nonincreasing()
    assert np.all(beam.sdp_ratio <= 1e-6)


def test_zero_radius_verification_is_nominal_slack():
    ch, est = _estimate(0.0)
    beam, phase, _ = alg.penalty_altmin(ch, TINY)
    slack, violations = robust.verify_worst_case(
        (beam, phase), est, 5, np.random.default_rng(0), gamma=TINY.gammas, sigma2=TINY.sigma2s)
    nominal = float(np.min(robust._sinr_under(ch.H[None, 0], beam.w, phase.v, 0, TINY.sigma2) - 1.0))
    nominal = min(nominal, float(np.min(robust._sinr_under(ch.H[None, 1], beam.w, phase.v, 1, TINY.sigma2) - 1.0)))
    assert slack == nominal and violations == 0


def test_verify_argument_checks():
    ch, est = _estimate(0.1)
    beam, phase, _ = alg.penalty_altmin(ch, TINY, max_outer=1)
    with pytest.raises(ValueError, match="samples"):
        robust.verify_worst_case((beam, phase), est, 0, np.random.default_rng(0), gamma=1, sigma2=1e-12)
    _, est3 = _estimate(0.1, cfg=TINY.with_(irs_elements=(3,)))
    with pytest.raises(ValueError, match="do not match"):
        robust.verify_worst_case((beam, phase), est3, 5, np.random.default_rng(0), gamma=1, sigma2=1e-12)


def test_nominal_design_is_caught_by_adversary():
    ch, est = _estimate(0.1)
    beam, phase, _ = alg.penalty_altmin(est, TINY)
    _, violations = robust.verify_worst_case(
        (beam, phase), est, 200, np.random.default_rng(1), gamma=TINY.gammas, sigma2=TINY.sigma2s)
    assert violations > 0


def test_robust_power_grows_with_radius():
    ph = alg.initial_phase(TINY, 2, 0)
    powers = [robust.robust_beamforming_fixed_phase(_estimate(k)[1], TINY.gammas, TINY.sigma2s, ph).P
              for k in (0.05, 0.2)]
    assert powers[1] > powers[0]


def test_robust_sdr_and_fixed_phase_designs_are_sound():
    ch, est = _estimate(0.05)
    for beam, phase, _ in (robust.robust_sdr_altmin(est, TINY, max_iter=2),
                           robust.robust_fixed_phase_design(est, TINY, alg.initial_phase(TINY, 2, 0))):
        _, violations = robust.verify_worst_case(
            (beam, phase), est, 300, np.random.default_rng(2), gamma=TINY.gammas, sigma2=TINY.sigma2s)
        assert violations == 0
