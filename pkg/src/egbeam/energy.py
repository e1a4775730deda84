"""Nonlinear energy-harvesting model, threshold inversion, and the
first-order Taylor minorant of received RF power used by the SCA loop."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ThresholdUnreachable


@dataclass(frozen=True)
class EhCircuit:
    m: float         # saturation DC power, W
    upsilon: float   # sigmoid steepness, 1/W
    varsigma: float  # sigmoid midpoint, W

    @classmethod
    def from_params(cls, p) -> "EhCircuit":
        return cls(m=p.max_dc_power, upsilon=p.steepness, varsigma=p.turning_point)

    # x, y normalize the sigmoid so that zero input harvests exactly zero
    @property
    def x(self) -> float:
        e = math.exp(self.upsilon * self.varsigma)
        return e / (1.0 + e)

    @property
    def y(self) -> float:
        return self.m / math.exp(self.upsilon * self.varsigma)


def harvested_power(circuit: EhCircuit, q: float) -> float:
    """DC output for received RF power q >= 0; zero at q=0, saturates at m."""
    sig = 1.0 + math.exp(-circuit.upsilon * (q - circuit.varsigma))
    return circuit.m / (circuit.x * sig) - circuit.y


def invert_threshold(circuit: EhCircuit, e_min: float) -> float:
    """Received RF power at which the circuit harvests exactly e_min."""
    if e_min < 0:
        raise ThresholdUnreachable(f"negative threshold {e_min}")
    if e_min >= circuit.m:
        raise ThresholdUnreachable(
            f"threshold {e_min} at or above saturation {circuit.m}"
        )
    arg = circuit.m / ((e_min + circuit.y) * circuit.x) - 1.0
    if arg <= 0:
        raise ThresholdUnreachable(f"threshold {e_min} outside circuit range")
    return circuit.varsigma - math.log(arg) / circuit.upsilon


def linearized_received_power(g: np.ndarray, p: np.ndarray, p_anchor: np.ndarray) -> float:
    """Affine minorant of |g^H p|^2, tight at p = p_anchor."""
    if not (len(g) == len(p) == len(p_anchor)):
        raise ValueError("g, p, p_anchor must have equal lengths")
    at_anchor = np.vdot(g, p_anchor)          # g^H p_anchor
    return float(2.0 * (np.conj(at_anchor) * np.vdot(g, p)).real - abs(at_anchor) ** 2)


def eh_constraint_slack(P_mat, P_anchor_mat, scenario, circuits, thresholds) -> np.ndarray:
    """Per-receiver slack of the linearized harvest constraint.

    Nonnegative slack implies the true (sigmoid) constraint holds, because the
    linearization lower-bounds received power and the circuit is increasing.
    """
    e_tilde = np.array([invert_threshold(c, e) for c, e in zip(circuits, thresholds)])
    a = scenario.g.conj() @ P_anchor_mat      # (L, K+1) anchor gains
    b = scenario.g.conj() @ P_mat
    u = (2.0 * (np.conj(a) * b).real - np.abs(a) ** 2).sum(axis=1)
    return u - e_tilde
