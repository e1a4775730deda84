"""Scenario configuration and random channel generation.

All scenario and algorithm parameters live in ``SystemConfig``; a ``Scenario``
is one concrete channel realization drawn from it. Channels are i.i.d.
Rayleigh (unit-variance circularly-symmetric complex Gaussian), the standard
default for this literature. Generation is a pure function of
(config, seed, offset).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace, asdict

import numpy as np
import yaml


@dataclass
class EhParams:
    """Per-receiver nonlinear rectifier constants (all in watts / 1-per-watt)."""

    max_dc_power: float = 24e-3   # saturation DC output
    steepness: float = 150.0      # sigmoid steepness, 1/W
    turning_point: float = 14e-3  # sigmoid midpoint input power, W


# Default scale on energy-receiver channels; calibrated once so that the
# mW-scale harvest thresholds are reachable but not vacuous at SNR = 25 dB.
DEFAULT_ER_GAIN = 0.01


@dataclass
class SystemConfig:
    # geometry / population
    n_tx: int = 4
    n_rx: int = 4
    n_users: int = 4
    n_ers: int = 2
    # power / noise
    snr_db: float = 25.0
    power_budget: float | None = None  # None -> derived from snr_db
    noise_comm: float = 1.0
    noise_sense: float = 1.0
    # objective trade-off (rate in nats vs CRB trace)
    tradeoff: float = 0.1
    # energy harvesting
    eh_params: list[EhParams] = field(default_factory=lambda: [EhParams(), EhParams()])
    eh_thresholds: list[float] = field(default_factory=lambda: [6e-3, 6e-3])
    er_channel_gain: float = DEFAULT_ER_GAIN
    # target
    theta: float = 0.0
    alpha: complex = 1.0 + 0.0j
    # solver tolerances and caps
    tol_outer: float = 1e-3
    tol_middle: float = 1e-3
    tol_inner: float = 1e-3
    max_outer: int = 50
    max_middle: int = 50
    max_inner: int = 5000
    # iterations between inner-loop stall checks; per-step objective changes
    # are far below the step-to-step noise floor of the extragradient method
    inner_check_window: int = 50
    # extragradient step parameters
    step_init: float = 0.1
    step_shrink: float = 0.9
    psd_margin: float = 1e-8
    fim_det_rtol: float = 1e-12
    # initial dual values for each inner solve
    dual_init_rho: float = 0.01
    dual_init_mu: float = 0.01
    dual_init_omega: float = 0.01
    dual_init_eta: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        self.eh_params = [
            EhParams(**p) if isinstance(p, dict) else p for p in self.eh_params
        ]
        self.validate()

    def validate(self):
        if min(self.n_tx, self.n_rx, self.n_users) < 1 or self.n_ers < 0:
            raise ValueError("antenna/user counts must be positive (n_ers >= 0)")
        if self.tradeoff < 0:
            raise ValueError("tradeoff must be nonnegative")
        if not (0.0 < self.step_shrink < 1.0):
            raise ValueError("step_shrink must lie in (0, 1)")
        for name in ("tol_outer", "tol_middle", "tol_inner", "step_init",
                     "psd_margin", "noise_comm", "noise_sense"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if len(self.eh_params) != self.n_ers or len(self.eh_thresholds) != self.n_ers:
            raise ValueError("eh_params/eh_thresholds length must equal n_ers")
        for p, e_min in zip(self.eh_params, self.eh_thresholds):
            if min(p.max_dc_power, p.steepness, p.turning_point) <= 0:
                raise ValueError("EH circuit constants must be positive")
            us = p.steepness * p.turning_point
            x = math.exp(us) / (1.0 + math.exp(us))
            y = p.max_dc_power / math.exp(us)
            if (e_min + y) * x >= p.max_dc_power:
                raise ValueError(
                    f"EH threshold {e_min} unreachable for circuit {p}"
                )
        if self.er_channel_gain < 0:
            raise ValueError("er_channel_gain must be nonnegative")

    @property
    def total_power(self) -> float:
        return power_from_snr(self) if self.power_budget is None else self.power_budget

    def with_overrides(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)


@dataclass
class Scenario:
    """One channel realization."""

    h: np.ndarray           # (K, N_t) complex, user channels
    g: np.ndarray           # (L, N_t) complex, energy-receiver channels
    theta: float            # target angle, rad
    alpha: complex          # target reflection coefficient
    noise_comm: float
    noise_sense: float

    def __post_init__(self):
        self.h = np.atleast_2d(np.asarray(self.h, dtype=complex))
        self.g = np.asarray(self.g, dtype=complex).reshape(-1, self.h.shape[1])
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.g))):
            raise ValueError("channel entries must be finite")
        if abs(self.alpha) == 0:
            raise ValueError("alpha must be nonzero (zero makes the FIM singular)")

    @property
    def n_users(self) -> int:
        return self.h.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h.shape[1]


def power_from_snr(config: SystemConfig) -> float:
    """Transmit power budget implied by the SNR axis, with unit-noise convention."""
    return 10.0 ** (config.snr_db / 10.0) * config.noise_comm


def _cscg(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def generate_scenario(config: SystemConfig, seed_offset: int = 0) -> Scenario:
    """Draw one Rayleigh channel realization, deterministic in (seed, offset)."""
    rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, seed_offset]))
    h = _cscg(rng, (config.n_users, config.n_tx))
    g = config.er_channel_gain * _cscg(rng, (config.n_ers, config.n_tx))
    return Scenario(
        h=h,
        g=g,
        theta=config.theta,
        alpha=config.alpha,
        noise_comm=config.noise_comm,
        noise_sense=config.noise_sense,
    )


# ---------------------------------------------------------------------------
# config file I/O (flat key-value YAML with per-ER arrays)
# ---------------------------------------------------------------------------

_EH_KEYS = ("eh_max_dc_power", "eh_steepness", "eh_turning_point")


def config_to_dict(config: SystemConfig) -> dict:
    d = asdict(config)
    params = d.pop("eh_params")
    d["eh_max_dc_power"] = [p["max_dc_power"] for p in params]
    d["eh_steepness"] = [p["steepness"] for p in params]
    d["eh_turning_point"] = [p["turning_point"] for p in params]
    d["alpha"] = [config.alpha.real, config.alpha.imag]
    return d


def config_from_dict(d: dict) -> SystemConfig:
    d = dict(d)
    if any(k in d for k in _EH_KEYS):
        m = d.pop("eh_max_dc_power")
        u = d.pop("eh_steepness")
        s = d.pop("eh_turning_point")
        d["eh_params"] = [
            EhParams(max_dc_power=mi, steepness=ui, turning_point=si)
            for mi, ui, si in zip(m, u, s)
        ]
    if isinstance(d.get("alpha"), (list, tuple)):
        d["alpha"] = complex(d["alpha"][0], d["alpha"][1])
    return SystemConfig(**d)


def save_config(config: SystemConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=True)


def load_config(path) -> SystemConfig:
    with open(path) as f:
        return config_from_dict(yaml.safe_load(f))
