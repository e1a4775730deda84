import math

import numpy as np
import pytest

from egbeam import rsma, sensing
from egbeam.config import SystemConfig, generate_scenario
from conftest import random_state


def brute_force_sinrs(P, s):
    """SINRs computed stream-by-stream with explicit loops."""
    k = s.n_users
    mat = P.matrix()
    sinr_c = np.empty(k)
    sinr_p = np.empty(k)
    for i in range(k):
        h = s.h[i]
        powers = [abs(np.vdot(h, mat[:, m])) ** 2 for m in range(k + 1)]
        interference_all = sum(powers[1:])
        sinr_c[i] = powers[0] / (interference_all + s.noise_comm)
        others = interference_all - powers[1 + i]
        sinr_p[i] = powers[1 + i] / (others + s.noise_comm)
    return sinr_c, sinr_p


def test_sinrs_match_brute_force():
    cfg = SystemConfig(n_users=3, n_tx=5, rng_seed=7)
    s = generate_scenario(cfg)
    rng = np.random.default_rng(0)
    for _ in range(10):
        P = random_state(s, rng)
        rep = rsma.compute_sinrs(P, s)
        sc, sp = brute_force_sinrs(P, s)
        assert np.allclose(rep.sinr_common, sc, rtol=1e-12)
        assert np.allclose(rep.sinr_private, sp, rtol=1e-12)


def test_common_stream_removed_before_private_decoding():
    # with only a common stream transmitted, private SINRs see pure noise
    cfg = SystemConfig()
    s = generate_scenario(cfg)
    P = rsma.PrecoderState(np.ones(s.n_tx, complex),
                           np.zeros((s.n_users, s.n_tx), complex),
                           np.zeros(s.n_users))
    rep = rsma.compute_sinrs(P, s)
    assert np.all(rep.sinr_private == 0.0)
    assert np.all(rep.sinr_common > 0.0)


def test_rates_in_bits_and_mmf():
    cfg = SystemConfig()
    s = generate_scenario(cfg)
    P = random_state(s, np.random.default_rng(1))
    rep = rsma.rate_report(P, s)
    assert np.allclose(rep.rate_private,
                       np.log2(1.0 + rep.sinr_private))
    expected = P.c_alloc / math.log(2.0) + rep.rate_private
    assert rep.mmf_rate == pytest.approx(float(expected.min()))
    # nats-domain worst-case rate agrees after unit conversion
    assert rsma.mmf_rate_nats(P, s) == pytest.approx(
        float(np.min(P.c_alloc + np.log1p(rep.sinr_private))))


def test_total_power_and_matrix_round_trip():
    cfg = SystemConfig()
    s = generate_scenario(cfg)
    P = random_state(s, np.random.default_rng(2), p_t=cfg.total_power)
    assert rsma.total_power(P) == pytest.approx(cfg.total_power)
    back = rsma.PrecoderState.from_matrix(P.matrix(), P.c_alloc, P.mmf_aux)
    assert np.array_equal(back.p_common, P.p_common)
    assert np.array_equal(back.p_private, P.p_private)


def test_objective_is_rate_minus_weighted_crb():
    cfg = SystemConfig(tradeoff=0.3)
    s = generate_scenario(cfg)
    P = random_state(s, np.random.default_rng(3), p_t=cfg.total_power)
    bundle = sensing.fim(P.matrix(), s, n_rx=cfg.n_rx)
    expected = rsma.mmf_rate_nats(P, s) - 0.3 * sensing.crb_trace(bundle)
    assert rsma.objective(P, s, cfg) == pytest.approx(expected)
    # with zero weight the sensing term disappears entirely
    cfg0 = cfg.with_overrides(tradeoff=0.0)
    assert rsma.objective(P, s, cfg0) == pytest.approx(rsma.mmf_rate_nats(P, s))


def test_feasibility_report_flags_violations():
    cfg = SystemConfig()
    s = generate_scenario(cfg)
    P = random_state(s, np.random.default_rng(4), p_t=cfg.total_power)
    rep = rsma.check_feasibility(P, s, cfg)
    assert rep.power_slack == pytest.approx(0.0, abs=1e-9)
    # doubling power violates the budget and the report notices
    P2 = rsma.PrecoderState(2 * P.p_common, 2 * P.p_private, P.c_alloc)
    assert not rsma.check_feasibility(P2, s, cfg).feasible()
    # an oversized common-rate split violates the decoding constraint
    P3 = rsma.PrecoderState(P.p_common, P.p_private,
                            P.c_alloc + 100.0)
    rep3 = rsma.check_feasibility(P3, s, cfg)
    assert rep3.common_rate_slack < 0.0


def test_stream_gains_rejects_antenna_mismatch():
    cfg = SystemConfig()
    s = generate_scenario(cfg)
    P = rsma.PrecoderState(np.ones(3, complex), np.zeros((4, 3), complex),
                           np.zeros(4))
    with pytest.raises(ValueError):
        rsma.stream_gains(s, P)
