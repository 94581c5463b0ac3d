import io

import numpy as np
import pytest

from irsopt.channels import (
    ChannelSet, ScenarioConfig, channels_from_dict, channels_to_dict, check_phases, db_to_linear,
    dbm_to_watts, degrade_csi, effective_gains, estimate_from_dict, estimate_to_dict,
    generate_channels, lifted_vector, read_matrices, rng_stream, sinr, sinr_lifted, watts_to_dbm,
    write_matrices,
)
from conftest import crandn

CFG = ScenarioConfig(nt=3, k=2, irs_elements=(4,))


def test_unit_conversions():
    assert dbm_to_watts(-90) == pytest.approx(1e-12)
    assert watts_to_dbm(1.0) == pytest.approx(30.0)
    assert db_to_linear(10) == pytest.approx(10.0)


@pytest.mark.parametrize("bad", [dict(nt=0), dict(k=0), dict(gamma=0.0), dict(sigma2=-1.0),
                                 dict(kappa=1.0), dict(eps=0.0), dict(mu=0.0), dict(irs_elements=(-1,)),
                                 dict(irs_positions=((1.0, 1.0), (2.0, 2.0)))])
def test_scenario_validation(bad):
    with pytest.raises(ValueError):
        ScenarioConfig(**bad)


def test_deterministic_per_drop():
    a, b = generate_channels(CFG, 3), generate_channels(CFG, 3)
    for x, y in ((a.F, b.F), (a.h, b.h), (a.d, b.d)):
        assert np.array_equal(x, y)
    assert not np.array_equal(a.d, generate_channels(CFG, 4).d)


def test_shapes_and_effective_channel():
    ch = generate_channels(CFG, 0)
    assert ch.F.shape == (4, 3) and ch.h.shape == (2, 4) and ch.d.shape == (2, 3)
    E = ch.E
    for k in range(2):
        np.testing.assert_allclose(E[k], np.diag(ch.h[k].conj()) @ ch.F, atol=1e-12)
        assert np.array_equal(ch.H[k], np.column_stack([E[k].conj().T, ch.d[k]]))


def test_pure_los_is_rank_one_per_block():
    cfg = ScenarioConfig(nt=4, k=1, irs_elements=(3, 5), beta=1e12)
    ch = generate_channels(cfg, 0)
    for block in (ch.F[:3], ch.F[3:]):
        s = np.linalg.svd(block, compute_uv=False)
        assert s[1] / s[0] < 1e-5


def test_ap_irs_path_loss_mean():
    cfg = ScenarioConfig(nt=2, k=1, irs_elements=(3,))
    assert cfg.wavelength == pytest.approx(0.12491, abs=1e-5)
    target = cfg.path_loss_ref * 100.0**-2.1
    vals = np.array([np.linalg.norm(generate_channels(cfg, d).F) ** 2 / 6 for d in range(200)])
    assert abs(vals.mean() - target) <= 3 * vals.std(ddof=1) / np.sqrt(200)


def test_colocated_irs_rejected():
    cfg = ScenarioConfig(irs_positions=((0.0, 0.0),))
    with pytest.raises(ValueError, match="distance"):
        generate_channels(cfg, 0)


def test_rng_streams_are_independent():
    a = rng_stream(1, 2, "csi").standard_normal(4)
    b = rng_stream(1, 2, "adversary").standard_normal(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, rng_stream(1, 2, "csi").standard_normal(4))


def test_cascade_consistency(rng):
    ch = generate_channels(CFG, 1)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    for k in range(2):
        lhs = ch.h[k].conj() @ np.diag(phi) @ ch.F
        np.testing.assert_allclose(lhs, phi @ ch.E[k], atol=1e-12 * np.abs(lhs).max())


def test_degrade_zero_kappa_is_exact():
    ch = generate_channels(CFG, 0)
    est = degrade_csi(ch, 0.0, rng_stream(0, 0, "csi"))
    assert np.array_equal(est.Ebar, ch.E) and np.array_equal(est.dbar, ch.d)
    assert np.all(est.eps == 0)


@pytest.mark.parametrize("kappa", [0.05, 0.2, 0.6])
def test_degrade_ball_contains_truth(kappa):
    ch = generate_channels(CFG, 2)
    est = degrade_csi(ch, kappa, rng_stream(0, 2, "csi"))
    err = np.linalg.norm((ch.H - est.H).reshape(2, -1), axis=1)
    assert np.all(err <= est.eps * (1 + 1e-12))
    np.testing.assert_allclose(est.kappa, kappa, rtol=1e-12)
    np.testing.assert_allclose(est.eps**2, est.eps_E**2 + est.eps_d**2, rtol=1e-12)
    ratio = np.linalg.norm(est.Ebar.reshape(2, -1), axis=1) / np.linalg.norm(est.dbar, axis=1)
    np.testing.assert_allclose(est.eps_E / est.eps_d, ratio, rtol=1e-10)


def test_degrade_balls_nested_over_kappa():
    ch = generate_channels(CFG, 5)
    small = degrade_csi(ch, 0.05, rng_stream(0, 5, "csi"))
    large = degrade_csi(ch, 0.2, rng_stream(0, 5, "csi"))
    gap = np.linalg.norm((small.H - large.H).reshape(2, -1), axis=1)
    assert np.all(gap + small.eps <= large.eps * (1 + 1e-12))


def test_degrade_rejects_large_kappa():
    with pytest.raises(ValueError):
        degrade_csi(generate_channels(CFG, 0), 1.0, np.random.default_rng(0))


def test_single_user_matched_filter_meets_target(rng):
    d = crandn(rng, 1, 4)
    ch = ChannelSet(np.zeros((0, 4), complex), np.zeros((1, 0), complex), d)
    gamma, s2 = 1.7, 1e-12
    w = (d[0] / np.linalg.norm(d[0]) * np.sqrt(gamma * s2) / np.linalg.norm(d[0]))[:, None]
    assert sinr(ch, w, np.zeros(0), s2, 0) == pytest.approx(gamma, rel=1e-12)
    assert sinr(ch, np.zeros((4, 1)), np.zeros(0), s2)[0] == 0.0


def test_direct_and_lifted_forms_agree(rng):
    ch = generate_channels(CFG, 0)
    w = crandn(rng, 3, 2) * 1e-1
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    v = lifted_vector(phi)
    W = np.einsum("nk,mk->knm", w, w.conj())
    a = sinr(ch, w, phi, [1e-12, 2e-12])
    b = sinr_lifted(ch, W, np.outer(v, v.conj()), [1e-12, 2e-12])
    np.testing.assert_allclose(a, b, rtol=1e-9)
    g = effective_gains(ch, phi)
    for k in range(2):
        quad = v.conj() @ ch.H[k].conj().T @ W[k] @ ch.H[k] @ v
        assert quad.real == pytest.approx(abs(g[k] @ w[:, k]) ** 2, rel=1e-9)


def test_global_phase_invariance(rng):
    ch = generate_channels(CFG, 0)
    w = crandn(rng, 3, 2)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    base = sinr(ch, w, phi, 1e-12)
    H = ch.H
    v = lifted_vector(phi) * np.exp(1j * 0.7)
    G = np.einsum("kna,a->kn", H, v).conj()
    P = np.abs(G @ w) ** 2
    np.testing.assert_allclose(np.diag(P) / (P.sum(1) - np.diag(P) + 1e-12), base, rtol=1e-10)


def test_matrix_dump_round_trip():
    ch = generate_channels(CFG, 0)
    est = degrade_csi(ch, 0.1, rng_stream(0, 0, "csi"))
    buf = io.StringIO()
    write_matrices(buf, {**channels_to_dict(ch), "empty": np.zeros((2, 0))})
    buf.seek(0)
    back = read_matrices(buf)
    assert back["empty"].shape == (2, 0)
    ch2 = channels_from_dict(back)
    assert np.array_equal(ch2.F, ch.F) and np.array_equal(ch2.d, ch.d) and ch2.irs_sizes == (4,)
    buf = io.StringIO()
    write_matrices(buf, estimate_to_dict(est))
    buf.seek(0)
    est2 = estimate_from_dict(read_matrices(buf))
    assert np.array_equal(est2.H, est.H) and np.array_equal(est2.eps, est.eps)


def test_matrix_dump_rejects_truncation():
    with pytest.raises(ValueError, match="expected 4 numbers"):
        read_matrices(io.StringIO("matrix a 2\n1 0 2\n"))


def test_check_phases():
    with pytest.raises(ValueError, match="unit modulus"):
        check_phases([1.0, 0.5], 2)
    with pytest.raises(ValueError, match="expected 3"):
        check_phases([1.0], 3)
