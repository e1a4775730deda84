"""Fractional-programming surrogates for the log-rate terms.

Two stacked transforms: a Lagrangian-dual transform introducing theta (one
per stream), then a quadratic transform introducing a complex phi per
stream. Both have closed-form optimal auxiliaries at which the surrogate
equals ln(1 + SINR); for any other auxiliaries it is a lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Scenario
from .rsma import PrecoderState, compute_sinrs, stream_gains


@dataclass
class AuxState:
    theta_c: np.ndarray  # (K,) nonnegative
    theta_p: np.ndarray
    phi_c: np.ndarray    # (K,) complex
    phi_p: np.ndarray

    def copy(self) -> "AuxState":
        return AuxState(self.theta_c.copy(), self.theta_p.copy(),
                        self.phi_c.copy(), self.phi_p.copy())


def _denominators(P: PrecoderState, s: Scenario):
    """(gains, T_c, T_p): T_c counts all streams + noise, T_p drops the common."""
    a = stream_gains(s, P)                       # (K, K+1)
    pw = np.abs(a) ** 2
    t_p = pw[:, 1:].sum(axis=1) + s.noise_comm
    t_c = t_p + pw[:, 0]
    return a, t_c, t_p


def update_theta(P: PrecoderState, s: Scenario):
    """Optimal first-stage auxiliaries: the current SINRs."""
    rep = compute_sinrs(P, s)
    return rep.sinr_common.copy(), rep.sinr_private.copy()


def update_phi(P: PrecoderState, s: Scenario, theta_c, theta_p):
    """Optimal second-stage auxiliaries (quadratic-transform maximizers)."""
    a, t_c, t_p = _denominators(P, s)
    k = np.arange(s.n_users)
    phi_c = np.sqrt(1.0 + theta_c) * a[:, 0] / t_c
    phi_p = np.sqrt(1.0 + theta_p) * a[k, 1 + k] / t_p
    return phi_c, phi_p


def surrogate_g(P: PrecoderState, s: Scenario, aux: AuxState):
    """Surrogate rates (g_c, g_p), each (K,), in nats.

    g = ln(1+theta) - theta + 2 sqrt(1+theta) Re{phi^* h^H p} - |phi|^2 T.
    The bilinear term conjugates phi so that update_phi is its exact maximizer.
    """
    a, t_c, t_p = _denominators(P, s)
    k = np.arange(s.n_users)
    s_c = (np.conj(aux.phi_c) * a[:, 0]).real
    s_p = (np.conj(aux.phi_p) * a[k, 1 + k]).real
    g_c = (np.log1p(aux.theta_c) - aux.theta_c
           + 2.0 * np.sqrt(1.0 + aux.theta_c) * s_c - np.abs(aux.phi_c) ** 2 * t_c)
    g_p = (np.log1p(aux.theta_p) - aux.theta_p
           + 2.0 * np.sqrt(1.0 + aux.theta_p) * s_p - np.abs(aux.phi_p) ** 2 * t_p)
    return g_c, g_p


def optimal_aux(P: PrecoderState, s: Scenario) -> AuxState:
    theta_c, theta_p = update_theta(P, s)
    phi_c, phi_p = update_phi(P, s, theta_c, theta_p)
    return AuxState(theta_c=theta_c, theta_p=theta_p, phi_c=phi_c, phi_p=phi_p)
