"""Sweep driver: Monte Carlo averaging over seeded channels along one
configuration axis, with CSV output and SVG plots."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import algorithm
from .config import SystemConfig, generate_scenario

SWEEP_AXES = ("n_tx", "n_users", "snr_db", "eh_threshold")

# columns excluded from determinism comparisons
TIMING_COLUMNS = ("wall_setup", "wall_inner", "wall_steps", "wall_mean",
                  "wall_se", "wall_inner_per_iter")


@dataclass
class SweepSpec:
    axis: str
    values: list
    base_config: SystemConfig = field(default_factory=SystemConfig)
    n_seeds: int = 100
    modes: tuple = ("RSMA",)
    seed_base: int = 0

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"axis must be one of {SWEEP_AXES}")
        if not self.values or list(self.values) != sorted(set(self.values)):
            raise ValueError("values must be nonempty and strictly increasing")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")

    def config_for(self, value) -> SystemConfig:
        if self.axis == "eh_threshold":
            return self.base_config.with_overrides(
                eh_thresholds=[float(value)] * self.base_config.n_ers)
        return self.base_config.with_overrides(**{self.axis: value})


@dataclass
class SweepResult:
    spec_axis: str
    rows: list          # per-(value, seed, mode) dicts, deterministic order
    aggregates: list    # per-(value, mode) dicts

    def aggregate_for(self, value, mode) -> dict:
        for agg in self.aggregates:
            if agg["value"] == value and agg["mode"] == mode:
                return agg
        raise KeyError((value, mode))


def _run_cell(args):
    spec, value, seed, mode = args
    cfg = spec.config_for(value).with_overrides(rng_seed=spec.seed_base)
    scenario = generate_scenario(cfg, seed_offset=seed)
    row = {"axis": spec.axis, "value": value, "mode": mode, "seed": seed}
    try:
        rec = algorithm.run(scenario, cfg, mode)
        row.update(rec.summary())
        # time per extragradient step, with the stall-check bookkeeping
        # between stepping windows excluded
        row["wall_inner_per_iter"] = (
            rec.wall_steps / rec.inner_iter_total if rec.inner_iter_total else 0.0)
        row["error"] = ""
    except Exception as exc:  # per-run failures are data, never abort the sweep
        row.update({"converged": False, "objective": math.nan,
                    "mmf_rate_bits": math.nan, "crb": math.nan,
                    "outer_iters": 0, "middle_iters": 0, "inner_iters": 0,
                    "wall_setup": 0.0, "wall_inner": 0.0, "wall_steps": 0.0,
                    "wall_inner_per_iter": 0.0, "min_slack": math.nan,
                    "error": f"{type(exc).__name__}: {exc}"})
    return row


def _mean_se(values):
    arr = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    cells = [(spec, v, s, m)
             for v in spec.values for s in range(spec.n_seeds) for m in spec.modes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, cells, chunksize=1))
    else:
        rows = [_run_cell(c) for c in cells]
    rows.sort(key=lambda r: (spec.values.index(r["value"]), r["seed"],
                             spec.modes.index(r["mode"])))
    aggregates = []
    for value in spec.values:
        for mode in spec.modes:
            sel = [r for r in rows if r["value"] == value and r["mode"] == mode]
            obj_m, obj_se = _mean_se([r["objective"] for r in sel])
            rate_m, rate_se = _mean_se([r["mmf_rate_bits"] for r in sel])
            crb_m, crb_se = _mean_se([r["crb"] for r in sel])
            wall_m, wall_se = _mean_se([r["wall_inner"] for r in sel])
            iter_wall = [r["wall_inner_per_iter"] for r in sel
                         if np.isfinite(r["wall_inner_per_iter"])]
            aggregates.append({
                "axis": spec.axis, "value": value, "mode": mode,
                "n_seeds": len(sel),
                "converged": sum(bool(r["converged"]) for r in sel),
                "objective_mean": obj_m, "objective_se": obj_se,
                "mmf_rate_mean": rate_m, "mmf_rate_se": rate_se,
                "crb_mean": crb_m, "crb_se": crb_se,
                "wall_mean": wall_m, "wall_se": wall_se,
                "wall_inner_per_iter": float(np.median(iter_wall)) if iter_wall else math.nan,
            })
    return SweepResult(spec_axis=spec.axis, rows=rows, aggregates=aggregates)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def emit_csv(result: SweepResult, path) -> Path:
    """Aggregate CSV at `path`, per-seed detail next to it (.detail.csv)."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            if result.aggregates:
                cols = list(result.aggregates[0].keys())
                writer.writerow(cols)
                for agg in result.aggregates:
                    writer.writerow([_fmt(agg[c]) for c in cols])
        detail = path.with_suffix(".detail.csv")
        with open(detail, "w", newline="") as f:
            writer = csv.writer(f)
            if result.rows:
                cols = list(result.rows[0].keys())
                writer.writerow(cols)
                for row in result.rows:
                    writer.writerow([_fmt(row[c]) for c in cols])
    except OSError as exc:
        raise OSError(f"failed writing sweep CSV at {path}: {exc}") from exc
    return path


def parse_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def emit_plot(result: SweepResult, kind: str, path) -> Path:
    """Standalone SVG; one series per mode, error bars from standard error."""
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    if not result.aggregates:
        raise ValueError("empty sweep result")
    modes = sorted({a["mode"] for a in result.aggregates})
    values = sorted({a["value"] for a in result.aggregates})
    axis_label = {"n_tx": "transmit antennas", "n_users": "users",
                  "snr_db": "SNR (dB)", "eh_threshold": "harvest threshold (W)"}
    xlabel = axis_label.get(result.spec_axis, result.spec_axis)

    fig, ax = plt.subplots(figsize=(5, 3.6))
    if kind == "objective_vs_axis":
        for mode in modes:
            aggs = [result.aggregate_for(v, mode) for v in values]
            ax.errorbar(values, [a["objective_mean"] for a in aggs],
                        yerr=[a["objective_se"] for a in aggs],
                        marker="o", capsize=3, label=mode)
        ax.set_ylabel("objective (nats)")
    elif kind == "rate_and_crb_vs_axis":
        ax2 = ax.twinx()
        for mode in modes:
            aggs = [result.aggregate_for(v, mode) for v in values]
            ax.errorbar(values, [a["mmf_rate_mean"] for a in aggs],
                        yerr=[a["mmf_rate_se"] for a in aggs],
                        marker="o", capsize=3, label=f"{mode} rate")
            ax2.errorbar(values, [a["crb_mean"] for a in aggs],
                         yerr=[a["crb_se"] for a in aggs],
                         marker="s", linestyle="--", capsize=3,
                         label=f"{mode} CRB")
        ax.set_ylabel("worst-case rate (bits)")
        ax2.set_ylabel("CRB trace")
        h1, l1 = ax.get_legend_handles_labels()
        h2, l2 = ax2.get_legend_handles_labels()
        ax.legend(h1 + h2, l1 + l2, fontsize=8)
    elif kind == "time_vs_axis":
        for mode in modes:
            aggs = [result.aggregate_for(v, mode) for v in values]
            ax.errorbar(values, [a["wall_mean"] for a in aggs],
                        yerr=[a["wall_se"] for a in aggs],
                        marker="o", capsize=3, label=mode)
        ax.set_ylabel("inner-loop wall clock (s)")
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    ax.set_xlabel(xlabel)
    if kind != "rate_and_crb_vs_axis":
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return Path(path)
