"""Transmit-side rate model: SINRs, rates, power, objective, feasibility.

The common stream is decoded first at every user (then removed by SIC), so
its SINR sees all private streams as interference while private SINRs only
see the other private streams. Internally all optimization quantities use
natural log; reported rates convert to bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import Scenario, SystemConfig
from .energy import EhCircuit, harvested_power
from . import sensing

LOG2 = math.log(2.0)


@dataclass
class PrecoderState:
    p_common: np.ndarray    # (N_t,) complex
    p_private: np.ndarray   # (K, N_t) complex, row k precodes user k's stream
    c_alloc: np.ndarray     # (K,) common-rate split, nats
    mmf_aux: float = 0.0    # max-min auxiliary r

    def __post_init__(self):
        self.p_common = np.asarray(self.p_common, dtype=complex)
        self.p_private = np.atleast_2d(np.asarray(self.p_private, dtype=complex))
        self.c_alloc = np.asarray(self.c_alloc, dtype=float)

    def matrix(self) -> np.ndarray:
        """Stacked (N_t, K+1) precoder, common stream first."""
        return np.column_stack([self.p_common, self.p_private.T])

    @classmethod
    def from_matrix(cls, mat: np.ndarray, c_alloc, mmf_aux: float = 0.0):
        return cls(mat[:, 0], mat[:, 1:].T, np.asarray(c_alloc, float), mmf_aux)

    def copy(self) -> "PrecoderState":
        return PrecoderState(
            self.p_common.copy(), self.p_private.copy(),
            self.c_alloc.copy(), self.mmf_aux,
        )


@dataclass
class RateReport:
    sinr_common: np.ndarray
    sinr_private: np.ndarray
    rate_common: np.ndarray = field(default=None)    # bits
    rate_private: np.ndarray = field(default=None)   # bits
    common_capacity: float = None
    per_user_total: np.ndarray = field(default=None)
    mmf_rate: float = None


def stream_gains(s: Scenario, P: PrecoderState) -> np.ndarray:
    """(K, K+1) matrix of h_k^H p_m, common column first."""
    mat = P.matrix()
    if mat.shape[0] != s.n_tx:
        raise ValueError(
            f"precoder has {mat.shape[0]} antennas, scenario has {s.n_tx}"
        )
    return s.h.conj() @ mat


def compute_sinrs(P: PrecoderState, s: Scenario) -> RateReport:
    a = np.abs(stream_gains(s, P)) ** 2       # (K, K+1) powers
    private_power = a[:, 1:].sum(axis=1)      # per user, all private streams
    own = np.abs(a[np.arange(s.n_users), 1 + np.arange(s.n_users)])
    sinr_common = a[:, 0] / (private_power + s.noise_comm)
    sinr_private = own / (private_power - own + s.noise_comm)
    return RateReport(sinr_common=sinr_common, sinr_private=sinr_private)


def compute_rates(report: RateReport, c_alloc: np.ndarray | None = None) -> RateReport:
    """Fill bit-rate fields; c_alloc (nats) converts to bits for reporting."""
    report.rate_common = np.log2(1.0 + report.sinr_common)
    report.rate_private = np.log2(1.0 + report.sinr_private)
    report.common_capacity = float(report.rate_common.min())
    if c_alloc is not None:
        report.per_user_total = c_alloc / LOG2 + report.rate_private
        report.mmf_rate = float(report.per_user_total.min())
    return report


def rate_report(P: PrecoderState, s: Scenario) -> RateReport:
    return compute_rates(compute_sinrs(P, s), P.c_alloc)


def total_power(P: PrecoderState) -> float:
    mat = P.matrix()
    return float(np.sum(np.abs(mat) ** 2))


def mmf_rate_nats(P: PrecoderState, s: Scenario) -> float:
    """Worst-case user rate c_k + ln(1 + sinr_private_k)."""
    rep = compute_sinrs(P, s)
    return float(np.min(P.c_alloc + np.log1p(rep.sinr_private)))


def objective(P: PrecoderState, s: Scenario, cfg: SystemConfig) -> float:
    """Trade-off objective: worst-case rate (nats) minus weighted CRB trace."""
    value = mmf_rate_nats(P, s)
    if cfg.tradeoff > 0.0:
        bundle = sensing.fim(P.matrix(), s, n_rx=cfg.n_rx, det_rtol=cfg.fim_det_rtol)
        value -= cfg.tradeoff * sensing.crb_trace(bundle)
    return value


@dataclass
class FeasibilityReport:
    """Signed slacks; a point is feasible iff every slack >= -tol."""

    common_rate_slack: float      # min_k ln(1+sinr_c,k) - sum(c)
    c_min: float                  # min_k c_k
    power_slack: float            # P_t - tr(PP^H)
    eh_slacks: np.ndarray         # harvested_l - E_l, per receiver

    def all_slacks(self) -> np.ndarray:
        return np.concatenate(
            [[self.common_rate_slack, self.c_min, self.power_slack], self.eh_slacks]
        )

    def feasible(self, tol: float = 1e-3) -> bool:
        return bool(np.all(self.all_slacks() >= -tol))


def check_feasibility(P: PrecoderState, s: Scenario, cfg: SystemConfig) -> FeasibilityReport:
    rep = compute_sinrs(P, s)
    common_rate_slack = float(np.min(np.log1p(rep.sinr_common)) - P.c_alloc.sum())
    power_slack = cfg.total_power - total_power(P)
    q = np.sum(np.abs(s.g.conj() @ P.matrix()) ** 2, axis=1)
    eh_slacks = np.array([
        harvested_power(EhCircuit.from_params(p), qi) - e_min
        for p, e_min, qi in zip(cfg.eh_params, cfg.eh_thresholds, q)
    ])
    return FeasibilityReport(
        common_rate_slack=common_rate_slack,
        c_min=float(P.c_alloc.min()) if P.c_alloc.size else 0.0,
        power_slack=power_slack,
        eh_slacks=eh_slacks,
    )
