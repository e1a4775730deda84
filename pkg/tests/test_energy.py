import numpy as np
import pytest

from egbeam import energy
from egbeam.config import EhParams, SystemConfig, generate_scenario
from egbeam.errors import ThresholdUnreachable


CIRCUIT = energy.EhCircuit.from_params(EhParams())


def test_zero_input_harvests_zero():
    assert energy.harvested_power(CIRCUIT, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_harvest_monotone_and_saturating():
    q = np.linspace(0.0, 0.08, 400)   # beyond this the sigmoid is flat in floats
    out = np.array([energy.harvested_power(CIRCUIT, qi) for qi in q])
    assert np.all(np.diff(out) > 0.0)
    tail = energy.harvested_power(CIRCUIT, 0.5)
    assert 0.99 * CIRCUIT.m < tail <= CIRCUIT.m


def test_invert_threshold_round_trip_grid():
    e_grid = np.linspace(1e-5, 0.999 * CIRCUIT.m, 100)
    for e_min in e_grid:
        q = energy.invert_threshold(CIRCUIT, float(e_min))
        assert abs(energy.harvested_power(CIRCUIT, q) - e_min) < 1e-9 * CIRCUIT.m


def test_invert_threshold_rejects_out_of_range():
    with pytest.raises(ThresholdUnreachable):
        energy.invert_threshold(CIRCUIT, -1e-6)
    with pytest.raises(ThresholdUnreachable):
        energy.invert_threshold(CIRCUIT, CIRCUIT.m)


def test_minorant_bounds_received_power():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = rng.integers(2, 6)
        g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        p = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        anchor = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        u = energy.linearized_received_power(g, p, anchor)
        true = abs(np.vdot(g, p)) ** 2
        assert u <= true + 1e-12
    # tight exactly at the anchor
    u0 = energy.linearized_received_power(g, anchor, anchor)
    assert u0 == pytest.approx(abs(np.vdot(g, anchor)) ** 2, rel=1e-12)


def test_minorant_rejects_length_mismatch():
    with pytest.raises(ValueError):
        energy.linearized_received_power(np.ones(3), np.ones(2), np.ones(3))


def test_constraint_slack_sums_streams_and_certifies_true_constraint():
    cfg = SystemConfig()
    s = generate_scenario(cfg, seed_offset=1)
    rng = np.random.default_rng(1)
    shape = (s.n_tx, s.n_users + 1)
    anchor = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    P = anchor + 0.05 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    circuits = [energy.EhCircuit.from_params(p) for p in cfg.eh_params]
    slack = energy.eh_constraint_slack(P, anchor, s, circuits, cfg.eh_thresholds)
    # per-receiver slack equals the sum of per-stream minorants minus target
    for ell in range(s.g.shape[0]):
        u = sum(energy.linearized_received_power(s.g[ell], P[:, m], anchor[:, m])
                for m in range(shape[1]))
        e_t = energy.invert_threshold(circuits[ell], cfg.eh_thresholds[ell])
        assert slack[ell] == pytest.approx(u - e_t, rel=1e-10)
    # nonnegative linearized slack implies the sigmoid constraint holds
    for ell, s_l in enumerate(slack):
        if s_l >= 0.0:
            q = float(np.sum(np.abs(s.g[ell].conj() @ P) ** 2))
            assert (energy.harvested_power(circuits[ell], q)
                    >= cfg.eh_thresholds[ell] - 1e-12)
