"""ULA steering model, Fisher information over (theta, Re alpha, Im alpha),
CRB trace, and the linearized sensing surrogate used by the SCA loop."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Scenario
from .errors import SingularFIM


@dataclass
class SteeringPair:
    a_tx: np.ndarray
    a_rx: np.ndarray
    da_tx: np.ndarray
    da_rx: np.ndarray


def steering_vector(theta: float, n: int):
    """Symmetric-index ULA response and its analytic theta-derivative."""
    m = np.arange(n) - (n - 1) / 2.0
    a = np.exp(1j * m * math.pi * math.sin(theta))
    da = 1j * m * math.pi * math.cos(theta) * a
    return a, da


def steering(theta: float, n_tx: int, n_rx: int) -> SteeringPair:
    a_tx, da_tx = steering_vector(theta, n_tx)
    a_rx, da_rx = steering_vector(theta, n_rx)
    return SteeringPair(a_tx=a_tx, a_rx=a_rx, da_tx=da_tx, da_rx=da_rx)


@dataclass
class FimBundle:
    f: np.ndarray        # 3x3 real Fisher information
    a_mat: np.ndarray    # (N_r, N_t) two-way response a_r a_t^H
    da_mat: np.ndarray   # its theta-derivative
    kappa: float         # 2 / noise_sense
    r_x: np.ndarray      # (N_t, N_t) transmit covariance P P^H
    alpha: complex
    det_rtol: float = 1e-12


def fim(P_mat: np.ndarray, s: Scenario, n_rx: int | None = None,
        det_rtol: float = 1e-12) -> FimBundle:
    """Blockwise Fisher information for (theta, Re alpha, Im alpha)."""
    n_tx = P_mat.shape[0]
    if n_rx is None:
        n_rx = n_tx
    sp = steering(s.theta, n_tx, n_rx)
    a_mat = np.outer(sp.a_rx, sp.a_tx.conj())
    da_mat = np.outer(sp.da_rx, sp.a_tx.conj()) + np.outer(sp.a_rx, sp.da_tx.conj())
    kappa = 2.0 / s.noise_sense
    r_x = P_mat @ P_mat.conj().T

    f11 = kappa * abs(s.alpha) ** 2 * np.trace(da_mat @ r_x @ da_mat.conj().T).real
    u = np.conj(s.alpha) * np.trace(a_mat @ r_x @ da_mat.conj().T)
    f12 = kappa * np.array([u.real, -u.imag])
    f22 = kappa * np.trace(a_mat @ r_x @ a_mat.conj().T).real

    f = np.zeros((3, 3))
    f[0, 0] = f11
    f[0, 1:] = f12
    f[1:, 0] = f12
    f[1, 1] = f[2, 2] = f22
    return FimBundle(f=f, a_mat=a_mat, da_mat=da_mat, kappa=kappa, r_x=r_x,
                     alpha=s.alpha, det_rtol=det_rtol)


def _inv3(f: np.ndarray, det_rtol: float) -> np.ndarray:
    """Closed-form adjugate inverse of a 3x3 matrix with a singularity guard."""
    cof = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(f, i, axis=0), j, axis=1)
            cof[i, j] = ((-1) ** (i + j)) * (
                minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0]
            )
    det = float(f[0, 0] * cof[0, 0] + f[0, 1] * cof[0, 1] + f[0, 2] * cof[0, 2])
    scale = float(np.linalg.norm(f)) ** 3
    if abs(det) < det_rtol * max(scale, 1e-300):
        raise SingularFIM(f"FIM determinant {det:.3e} below threshold")
    return cof.T / det


def crb_trace(bundle: FimBundle) -> float:
    return float(np.trace(_inv3(bundle.f, bundle.det_rtol)))


@dataclass
class SurrogateBundle:
    phi: np.ndarray         # 3x3, inverse-FIM squared
    b_mat: np.ndarray       # (N_t, N_t) raw sensitivity of -CRB w.r.t. R_x
    lambda_mat: np.ndarray  # PSD-shifted Hermitian part of b_mat
    zeta: float


def surrogate_matrices(bundle: FimBundle, psd_margin: float = 1e-8) -> SurrogateBundle:
    """Linearization weights for the CRB term around the current precoder."""
    f_inv = _inv3(bundle.f, bundle.det_rtol)
    phi = f_inv @ f_inv
    a, da = bundle.a_mat, bundle.da_mat
    b = bundle.kappa * (
        phi[0, 0] * abs(bundle.alpha) ** 2 * (da.conj().T @ da)
        + 2.0 * (phi[0, 1] + 1j * phi[0, 2]) * np.conj(bundle.alpha) * (da.conj().T @ a)
        + (phi[1, 1] + phi[2, 2]) * (a.conj().T @ a)
    )
    b_sym = 0.5 * (b + b.conj().T)
    min_eig = float(np.linalg.eigvalsh(b_sym)[0])
    zeta = max(0.0, -min_eig) + psd_margin
    lambda_mat = zeta * np.eye(b.shape[0]) + b_sym
    return SurrogateBundle(phi=phi, b_mat=b, lambda_mat=lambda_mat, zeta=zeta)


def surrogate_sensing_term(P_mat: np.ndarray, P_anchor_mat: np.ndarray,
                           surrogate: SurrogateBundle) -> float:
    """2 Re tr(P_anchor P^H Lambda); caller applies the trade-off weight."""
    return float(2.0 * np.trace(
        P_anchor_mat @ P_mat.conj().T @ surrogate.lambda_mat
    ).real)
