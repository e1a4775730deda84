"""Command-line driver: single runs, sweeps, oracle verification, replots."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import algorithm, harness, oracles
from .config import (SystemConfig, config_from_dict, generate_scenario,
                     load_config)


def _load_cfg(args) -> SystemConfig:
    cfg = load_config(args.config) if args.config else SystemConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides(rng_seed=args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    scenario = generate_scenario(cfg, seed_offset=args.offset)
    rec = algorithm.run(scenario, cfg, args.mode)
    summary = rec.summary()
    summary["note"] = "objective and internal rates are in nats; reported rates in bits"
    print(json.dumps(summary, indent=2, default=float))
    if args.out:
        Path(args.out).write_text(json.dumps({
            **summary,
            "outer_trace": rec.outer_trace,
            "middle_trace": rec.middle_trace,
            "slacks": rec.feasibility.all_slacks().tolist(),
        }, indent=2, default=float))
    return 0


def cmd_sweep(args) -> int:
    with open(args.spec) as f:
        raw = yaml.safe_load(f)
    base = config_from_dict(raw.get("base_config", {}))
    if args.config:
        base = load_config(args.config)
    spec = harness.SweepSpec(
        axis=raw["axis"],
        values=raw["values"],
        base_config=base,
        n_seeds=raw.get("n_seeds", 100),
        modes=tuple(raw.get("modes", ["RSMA"])),
        seed_base=raw.get("seed_base", 0),
    )
    result = harness.run_sweep(spec, jobs=args.jobs)
    out = Path(args.out or "sweep.csv")
    harness.emit_csv(result, out)
    for kind in ("objective_vs_axis", "rate_and_crb_vs_axis", "time_vs_axis"):
        harness.emit_plot(result, kind, out.with_suffix(f".{kind}.svg"))
    print(f"wrote {out} and plots")
    return 0


def cmd_verify(args) -> int:
    """Quick oracle cross-checks; the full suite lives in the pytest tests."""
    from . import dual_eg, fp, rsma, sensing
    cfg = SystemConfig(rng_seed=args.seed or 0)
    s = generate_scenario(cfg, 0)
    failures = []

    P = algorithm.init_precoder(s, cfg)
    blockwise = sensing.fim(P.matrix(), s, n_rx=cfg.n_rx).f
    direct = oracles.fim_by_definition(P.matrix(), s, n_rx=cfg.n_rx)
    ok = np.linalg.norm(blockwise - direct) <= 1e-9 * np.linalg.norm(direct)
    print(f"fim blockwise vs definition: {'PASS' if ok else 'FAIL'}")
    if not ok:
        failures.append("fim")

    aux = fp.optimal_aux(P, s)
    g_c, g_p = fp.surrogate_g(P, s, aux)
    rep = rsma.compute_sinrs(P, s)
    err = max(np.abs(g_c - np.log1p(rep.sinr_common)).max(),
              np.abs(g_p - np.log1p(rep.sinr_private)).max())
    ok = err < 1e-10
    print(f"fp surrogate tightness (max err {err:.2e}): {'PASS' if ok else 'FAIL'}")
    if not ok:
        failures.append("fp")

    bundle = sensing.fim(P.matrix(), s, n_rx=cfg.n_rx)
    surr = sensing.surrogate_matrices(bundle, cfg.psd_margin)
    ctx = dual_eg.SubproblemContext(
        s, cfg, aux, P.matrix(), surr,
        objective_fn=lambda pm, c: rsma.objective(
            rsma.PrecoderState.from_matrix(pm, c), s, cfg))
    point = dual_eg.VIPoint(P=P.matrix(), c=P.c_alloc, r=0.0,
                            dual=dual_eg.initial_duals(ctx, cfg))
    x = dual_eg.stack(point)
    analytic = dual_eg.vi_map(x, ctx)
    fd = oracles.fd_gradient(
        lambda v: dual_eg.lagrangian_value(
            dual_eg.unstack(v, ctx.n_tx, ctx.n_users, ctx.n_ers), ctx), x)
    n_primal, _ = dual_eg.layout_sizes(ctx.n_tx, ctx.n_users, ctx.n_ers)
    expected = np.concatenate([-fd[:n_primal], fd[n_primal:]])
    rel = np.linalg.norm(analytic - expected) / max(np.linalg.norm(expected), 1e-12)
    ok = rel < 1e-5
    print(f"gradients vs finite differences (rel err {rel:.2e}): {'PASS' if ok else 'FAIL'}")
    if not ok:
        failures.append("gradients")

    if failures:
        print(f"error: verification failed: {','.join(failures)}")
        return 1
    print("all verification checks passed")
    return 0


def cmd_plot(args) -> int:
    rows = harness.parse_csv(args.csv)
    if not rows:
        print("error: empty CSV", file=sys.stderr)
        return 1
    for r in rows:
        for key, val in r.items():
            if key not in ("axis", "mode"):
                try:
                    r[key] = float(val)
                except ValueError:
                    pass
    result = harness.SweepResult(spec_axis=rows[0]["axis"], rows=[], aggregates=rows)
    harness.emit_plot(result, args.kind, args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="egbeam",
        description="Joint communication/sensing/powering beamformer optimizer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single optimization run")
    p_run.add_argument("--config", help="YAML config file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--offset", type=int, default=0, help="channel seed offset")
    p_run.add_argument("--mode", choices=["RSMA", "SDMA"], default="RSMA")
    p_run.add_argument("--out", help="write full run record (JSON)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="parameter sweep from a spec file")
    p_sweep.add_argument("spec", help="YAML sweep spec")
    p_sweep.add_argument("--config", help="base config override")
    p_sweep.add_argument("--out", help="aggregate CSV path")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the oracle cross-checks")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    p_plot = sub.add_parser("plot", help="re-render plots from a sweep CSV")
    p_plot.add_argument("csv")
    p_plot.add_argument("--kind", default="objective_vs_axis",
                        choices=["objective_vs_axis", "rate_and_crb_vs_axis",
                                 "time_vs_axis"])
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(func=cmd_plot)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
