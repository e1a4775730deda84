"""Joint communication/sensing/powering beamformer design library."""

from .config import (EhParams, Scenario, SystemConfig, generate_scenario,
                     load_config, power_from_snr, save_config)
from .rsma import (FeasibilityReport, PrecoderState, RateReport,
                   check_feasibility, compute_rates, compute_sinrs, objective,
                   total_power)
from .algorithm import RunRecord, init_precoder, renormalize_power, run

__all__ = [
    "EhParams", "Scenario", "SystemConfig", "generate_scenario",
    "load_config", "power_from_snr", "save_config",
    "FeasibilityReport", "PrecoderState", "RateReport", "check_feasibility",
    "compute_rates", "compute_sinrs", "objective", "total_power",
    "RunRecord", "init_precoder", "renormalize_power", "run",
]

__version__ = "0.1.0"
