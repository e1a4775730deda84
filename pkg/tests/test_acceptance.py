"""Acceptance gate: ten end-to-end criteria, one printed PASS/FAIL line each.

The Monte Carlo criteria share a single session-scoped sweep over the harvest
threshold (100 seeds x 2 modes x 4 thresholds at the reference settings:
4 antennas, 4 users, 2 energy receivers, SNR 25 dB, trade-off 0.1).
"""

import math
import os
import time

import numpy as np
import pytest

from egbeam import (algorithm, dual_eg, energy, fp, harness, oracles, rsma,
                    sensing)
from egbeam.config import EhParams, SystemConfig, generate_scenario
import conftest
from conftest import build_context, random_state, tiny_config

REFERENCE_THRESHOLD = 6e-3
SIGN_TEST_ALPHA = 0.05


def report(num, label, ok, detail=""):
    tail = f" ({detail})" if detail else ""
    line = f"criterion {num} ({label}): {'PASS' if ok else 'FAIL'}{tail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append((num, line))
    return ok


def sign_test_critical(n, alpha=SIGN_TEST_ALPHA):
    """Smallest win count rejecting 'no difference' in a one-sided sign test."""
    tail = 0.0
    for w in range(n, -1, -1):
        tail += math.comb(n, w) / 2.0 ** n
        if tail > alpha:
            return w + 1
    return 0


@pytest.fixture(scope="session")
def harvest_sweep():
    spec = harness.SweepSpec(
        axis="eh_threshold",
        values=[2e-3, 4e-3, REFERENCE_THRESHOLD, 8e-3],
        base_config=SystemConfig(),
        n_seeds=100,
        modes=("RSMA", "SDMA"),
    )
    jobs = min(8, os.cpu_count() or 1)
    return harness.run_sweep(spec, jobs=jobs)


def reference_rows(result, mode):
    rows = [r for r in result.rows
            if r["value"] == REFERENCE_THRESHOLD and r["mode"] == mode]
    assert len(rows) == 100
    return sorted(rows, key=lambda r: r["seed"])


def test_criterion_1_fp_tightness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst_tight = 0.0
    for i in range(100):
        cfg = SystemConfig(rng_seed=i)
        s = generate_scenario(cfg)
        P = random_state(s, rng)
        rep = rsma.compute_sinrs(P, s)
        g_c, g_p = fp.surrogate_g(P, s, fp.optimal_aux(P, s))
        worst_tight = max(worst_tight,
                          float(np.abs(g_c - np.log1p(rep.sinr_common)).max()),
                          float(np.abs(g_p - np.log1p(rep.sinr_private)).max()))
    worst_gap = -np.inf
    for i in range(10):
        cfg = SystemConfig(rng_seed=1000 + i)
        s = generate_scenario(cfg)
        P = random_state(s, rng)
        rep = rsma.compute_sinrs(P, s)
        rate_c = np.log1p(rep.sinr_common)
        rate_p = np.log1p(rep.sinr_private)
        k = s.n_users
        for _ in range(1000):
            aux = fp.AuxState(
                theta_c=rng.exponential(2.0, k),
                theta_p=rng.exponential(2.0, k),
                phi_c=rng.standard_normal(k) + 1j * rng.standard_normal(k),
                phi_p=rng.standard_normal(k) + 1j * rng.standard_normal(k),
            )
            g_c, g_p = fp.surrogate_g(P, s, aux)
            worst_gap = max(worst_gap, float((g_c - rate_c).max()),
                            float((g_p - rate_p).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_tight < 1e-10 and worst_gap <= 1e-12 and elapsed < 5.0
    assert report(1, "fp tightness", ok,
                  f"tight {worst_tight:.1e}, bound gap {worst_gap:.1e}, "
                  f"{elapsed:.1f}s")


def test_criterion_2_gradient_suite():
    t0 = time.perf_counter()
    cfg = SystemConfig()
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(20):
        s = generate_scenario(cfg.with_overrides(rng_seed=i))
        ctx, start = build_context(s, cfg)
        n_primal, n_dual = dual_eg.layout_sizes(ctx.n_tx, ctx.n_users,
                                                ctx.n_ers)
        x = dual_eg.stack(start)
        x[:n_primal] += 0.3 * rng.standard_normal(n_primal)
        x[n_primal:] = np.abs(x[n_primal:]
                              + 0.3 * rng.standard_normal(n_dual)) + 0.05

        def lag(v):
            return dual_eg.lagrangian_value(
                dual_eg.unstack(v, ctx.n_tx, ctx.n_users, ctx.n_ers), ctx)

        fd = oracles.fd_gradient(lag, x)
        expected = np.concatenate([-fd[:n_primal], fd[n_primal:]])
        got = dual_eg.vi_map(x, ctx)
        worst = max(worst, float(np.linalg.norm(got - expected)
                                 / np.linalg.norm(expected)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and elapsed < 10.0
    assert report(2, "analytic vs finite-difference gradients", ok,
                  f"worst rel err {worst:.1e}, {elapsed:.1f}s")


def test_criterion_3_fim_equivalence():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        n_tx = int(rng.integers(2, 5))
        n_rx = int(rng.integers(2, 5))
        cfg = SystemConfig(n_tx=n_tx, n_rx=n_rx, n_users=2,
                           rng_seed=int(rng.integers(10_000)))
        s = generate_scenario(cfg)
        shape = (n_tx, 3)
        P = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        blockwise = sensing.fim(P, s, n_rx=n_rx).f
        direct = oracles.fim_by_definition(P, s, n_rx=n_rx)
        worst = max(worst, float(np.linalg.norm(blockwise - direct)
                                 / np.linalg.norm(direct)))
    cfg = SystemConfig()
    s = generate_scenario(cfg)
    P = random_state(s, rng, p_t=cfg.total_power).matrix()
    f1 = sensing.fim(P, s, n_rx=cfg.n_rx)
    f2 = sensing.fim(np.sqrt(2.0) * P, s, n_rx=cfg.n_rx)
    scale_err = abs(sensing.crb_trace(f2) - 0.5 * sensing.crb_trace(f1)) / (
        0.5 * sensing.crb_trace(f1))
    ok = worst <= 1e-9 and scale_err < 1e-10
    assert report(3, "fim blockwise vs definition", ok,
                  f"worst rel err {worst:.1e}, scaling err {scale_err:.1e}")


def test_criterion_4_eh_model():
    circuit = energy.EhCircuit.from_params(EhParams())
    worst_rt = 0.0
    for e_min in np.linspace(1e-5, 0.999 * circuit.m, 100):
        q = energy.invert_threshold(circuit, float(e_min))
        worst_rt = max(worst_rt,
                       abs(energy.harvested_power(circuit, q) - e_min))
    rng = np.random.default_rng(3)
    worst_gap = -np.inf
    worst_anchor = 0.0
    for _ in range(10_000):
        n = int(rng.integers(2, 6))
        g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        p = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        anchor = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        u = energy.linearized_received_power(g, p, anchor)
        worst_gap = max(worst_gap, u - abs(np.vdot(g, p)) ** 2)
        at = abs(np.vdot(g, anchor)) ** 2
        u0 = energy.linearized_received_power(g, anchor, anchor)
        worst_anchor = max(worst_anchor, abs(u0 - at) / max(at, 1e-30))
    ok = (worst_rt < 1e-9 * circuit.m and worst_gap <= 1e-12
          and worst_anchor < 1e-12)
    assert report(4, "eh round trip and taylor minorant", ok,
                  f"round trip {worst_rt:.1e}, gap {worst_gap:.1e}, "
                  f"anchor {worst_anchor:.1e}")


def test_criterion_5_eg_solver_sanity():
    x, residual, steps = dual_eg.bilinear_saddle_demo(n_steps=10_000)
    saddle_ok = residual < 1e-6 and float(np.linalg.norm(x)) < 1e-6

    worst_deficit = -np.inf
    for i in range(20):
        cfg = tiny_config()
        s = generate_scenario(cfg.with_overrides(rng_seed=i))
        ctx, start = build_context(s, cfg)
        point, _ = dual_eg.solve_subproblem(start, ctx, cfg.tol_inner,
                                            cfg.max_inner)
        eg_val = oracles.subproblem_objective(point, ctx)
        _, oracle_val = oracles.subproblem_random_search(ctx, budget=1500,
                                                         seed=i)
        worst_deficit = max(worst_deficit, oracle_val - eg_val)
    ok = saddle_ok and worst_deficit <= 1e-2
    assert report(5, "eg solver sanity", ok,
                  f"saddle residual {residual:.1e} in {steps} steps, "
                  f"worst deficit vs oracle {worst_deficit:.1e}")


def test_criterion_6_end_to_end_feasibility(harvest_sweep):
    details = []
    ok = True
    for mode in ("RSMA", "SDMA"):
        rows = reference_rows(harvest_sweep, mode)
        converged = [r for r in rows if r["converged"]]
        min_slack = min(r["min_slack"] for r in converged)
        ok = ok and len(converged) >= 95 and min_slack >= -1e-3
        details.append(f"{mode}: {len(converged)}/100 converged, "
                       f"min slack {min_slack:.1e}")
    assert report(6, "end-to-end feasibility", ok, "; ".join(details))


def test_criterion_7_rsma_beats_sdma(harvest_sweep):
    rsma_rows = reference_rows(harvest_sweep, "RSMA")
    sdma_rows = reference_rows(harvest_sweep, "SDMA")
    rate_r = np.array([r["mmf_rate_bits"] for r in rsma_rows])
    rate_s = np.array([r["mmf_rate_bits"] for r in sdma_rows])
    crb_r = np.array([r["crb"] for r in rsma_rows])
    crb_s = np.array([r["crb"] for r in sdma_rows])
    rate_wins = int(np.sum(rate_r > rate_s))
    crb_wins = int(np.sum(crb_r < crb_s))
    critical = sign_test_critical(100)
    ok = (rate_r.mean() > rate_s.mean() and crb_r.mean() < crb_s.mean()
          and rate_wins >= critical and crb_wins >= critical)
    assert report(
        7, "rate-splitting beats no-common-stream baseline", ok,
        f"mean rate {rate_r.mean():.3f} vs {rate_s.mean():.3f} bits, "
        f"mean crb {crb_r.mean():.2e} vs {crb_s.mean():.2e}, "
        f"sign wins {rate_wins}/{crb_wins} (critical {critical})")


def test_criterion_8_harvest_threshold_trend(harvest_sweep):
    ok = True
    details = []
    for mode in ("RSMA", "SDMA"):
        aggs = [harvest_sweep.aggregate_for(v, mode)
                for v in (2e-3, 4e-3, REFERENCE_THRESHOLD, 8e-3)]
        for lo, hi in zip(aggs, aggs[1:]):
            rate_se = math.hypot(lo["mmf_rate_se"], hi["mmf_rate_se"])
            crb_se = math.hypot(lo["crb_se"], hi["crb_se"])
            if hi["mmf_rate_mean"] > lo["mmf_rate_mean"] + rate_se:
                ok = False
            if hi["crb_mean"] < lo["crb_mean"] - crb_se:
                ok = False
        rates = ", ".join(f"{a['mmf_rate_mean']:.3f}" for a in aggs)
        crbs = ", ".join(f"{a['crb_mean']:.2e}" for a in aggs)
        details.append(f"{mode} rate [{rates}], crb [{crbs}]")
    assert report(8, "rate falls and crb rises with harvest target", ok,
                  "; ".join(details))


def test_criterion_9_per_iteration_scaling():
    sizes = [4, 8, 16]
    # warm the compiled stepping kernel before timing anything
    warm = SystemConfig(n_tx=4)
    algorithm.run(generate_scenario(warm, seed_offset=0), warm, "RSMA")
    medians = []
    for n_tx in sizes:
        per_iter = []
        for seed in range(10):
            cfg = SystemConfig(n_tx=n_tx)
            s = generate_scenario(cfg, seed_offset=seed)
            rec = algorithm.run(s, cfg, "RSMA")
            if rec.inner_iter_total:
                per_iter.append(rec.wall_steps / rec.inner_iter_total)
        medians.append(float(np.median(per_iter)))
    slope = float(np.polyfit(np.log(sizes), np.log(medians), 1)[0])
    ok = 0.8 <= slope <= 2.2
    assert report(
        9, "per-iteration cost grows between linearly and quadratically", ok,
        f"medians {[f'{m * 1e6:.2f}us' for m in medians]}, exponent {slope:.2f}")


def test_criterion_10_sweep_determinism(tmp_path):
    spec_kwargs = dict(axis="snr_db", values=[20.0, 25.0],
                       base_config=SystemConfig(), n_seeds=3,
                       modes=("RSMA", "SDMA"))
    paths = []
    for tag in ("a", "b"):
        result = harness.run_sweep(harness.SweepSpec(**spec_kwargs), jobs=2)
        path = tmp_path / f"sweep_{tag}.csv"
        harness.emit_csv(result, path)
        paths.append(path)
    ok = True
    for suffix in ("", ".detail"):
        rows_a = harness.parse_csv(paths[0].with_suffix(suffix + ".csv"))
        rows_b = harness.parse_csv(paths[1].with_suffix(suffix + ".csv"))
        if len(rows_a) != len(rows_b):
            ok = False
            continue
        for a, b in zip(rows_a, rows_b):
            for key in a:
                if key not in harness.TIMING_COLUMNS and a[key] != b[key]:
                    ok = False
    assert report(10, "identical sweeps modulo timing columns", ok)
