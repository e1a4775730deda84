"""Saddle-point inner solver for one convex precoding subproblem.

With the fractional-programming auxiliaries and the SCA anchors frozen, the
subproblem is concave in the primal variables (precoders, common-rate split
c, max-min auxiliary r) and affine in the Lagrange multipliers. Its
first-order conditions form a monotone variational inequality over a set
whose only constraint is dual nonnegativity, so one prediction-correction
extragradient step needs nothing but gradient evaluations and a clip at
zero. Precoder coordinates are driven through Wirtinger derivatives: the
real-stacked gradient of L w.r.t. (Re p, Im p) is twice the derivative
w.r.t. p's conjugate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .config import Scenario, SystemConfig
from .energy import EhCircuit, invert_threshold
from .fp import AuxState
from .sensing import SurrogateBundle


@dataclass
class DualState:
    beta: np.ndarray    # (K,) duals of r <= c_k + g_p,k
    rho: np.ndarray     # (K,) duals of sum(c) <= g_c,k
    mu: np.ndarray      # (K,) duals of c >= 0
    omega_dual: float   # dual of the power budget
    eta: np.ndarray     # (L,) duals of the linearized harvest constraints


@dataclass
class VIPoint:
    P: np.ndarray       # (N_t, K+1) complex, common column first
    c: np.ndarray       # (K,)
    r: float
    dual: DualState

    def copy(self) -> "VIPoint":
        d = self.dual
        return VIPoint(self.P.copy(), self.c.copy(), self.r,
                       DualState(d.beta.copy(), d.rho.copy(), d.mu.copy(),
                                 d.omega_dual, d.eta.copy()))


class SubproblemContext:
    """Everything frozen during one inner solve: channels, auxiliaries,
    linearization anchors, harvest targets, and step-size constants."""

    def __init__(self, s: Scenario, cfg: SystemConfig, aux: AuxState,
                 anchor: np.ndarray, surrogate: SurrogateBundle,
                 objective_fn, sdma: bool = False):
        self.h = s.h                       # (K, N_t)
        self.hc = s.h.conj()
        self.g = s.g                       # (L, N_t)
        self.noise = s.noise_comm
        self.n_users = s.n_users
        self.n_tx = s.n_tx
        self.n_ers = s.g.shape[0]
        self.aux = aux
        self.anchor = anchor
        self.lam = cfg.tradeoff
        self.lambda_mat = surrogate.lambda_mat
        self.q_mat = surrogate.lambda_mat @ anchor      # columns q_i
        self.p_t = cfg.total_power
        self.step_cap = cfg.step_init
        self.step_shrink = cfg.step_shrink
        self.sdma = sdma
        self.objective_fn = objective_fn
        circuits = [EhCircuit.from_params(p) for p in cfg.eh_params]
        self.e_tilde = np.array([
            invert_threshold(c, e) for c, e in zip(circuits, cfg.eh_thresholds)
        ])
        self.anchor_g = s.g.conj() @ anchor             # (L, K+1)
        # precomputed surrogate-rate constants
        self.j_c = np.log1p(aux.theta_c) - aux.theta_c
        self.j_p = np.log1p(aux.theta_p) - aux.theta_p
        self.s_tilde_c = np.sqrt(1.0 + aux.theta_c) * aux.phi_c
        self.s_tilde_p = np.sqrt(1.0 + aux.theta_p) * aux.phi_p
        self.w_c = np.abs(aux.phi_c) ** 2
        self.w_p = np.abs(aux.phi_p) ** 2
        self._kidx = np.arange(self.n_users)
        # Diagonal preconditioner for the dual block. The raw constraint rows
        # mix units -- rate slacks are O(1) in nats, harvest slacks O(1e-2) in
        # watts, the power slack O(P_t) -- and the extragradient step size
        # adapts to the stiffest row, starving the others. Substituting
        # z' = S z rescales every row to O(1) without moving the saddle.
        k = self.n_users
        self.dual_scale = np.ones(3 * k + 1 + self.n_ers)
        self.dual_scale[3 * k] = self.p_t
        self.dual_scale[3 * k + 1:] = self.e_tilde

    def kernel_args(self):
        """Positional argument tuple for the compiled stepping kernel."""
        e_off = self.e_tilde + (np.abs(self.anchor_g) ** 2).sum(axis=1)
        return (
            np.ascontiguousarray(self.hc), np.ascontiguousarray(self.h),
            np.ascontiguousarray(self.g), np.ascontiguousarray(self.anchor_g),
            np.ascontiguousarray(self.lam * self.q_mat),
            self.j_c, self.j_p, self.w_c, self.w_p,
            np.ascontiguousarray(self.s_tilde_c.astype(complex)),
            np.ascontiguousarray(self.s_tilde_p.astype(complex)),
            e_off, float(self.noise), float(self.p_t),
            float(self.step_shrink), float(self.step_cap), self.sdma,
            self.dual_scale,
        )

    # -- surrogate rates at frozen auxiliaries --------------------------------
    def g_values(self, P: np.ndarray):
        a = self.hc @ P
        pw = np.abs(a) ** 2
        t_p = pw[:, 1:].sum(axis=1) + self.noise
        t_c = t_p + pw[:, 0]
        s_c = (np.conj(self.aux.phi_c) * a[:, 0]).real
        s_p = (np.conj(self.aux.phi_p) * a[self._kidx, 1 + self._kidx]).real
        g_c = self.j_c + 2.0 * np.sqrt(1.0 + self.aux.theta_c) * s_c - self.w_c * t_c
        g_p = self.j_p + 2.0 * np.sqrt(1.0 + self.aux.theta_p) * s_p - self.w_p * t_p
        return g_c, g_p

    def linearized_harvest(self, P: np.ndarray) -> np.ndarray:
        b = self.g.conj() @ P
        return (2.0 * (np.conj(self.anchor_g) * b).real
                - np.abs(self.anchor_g) ** 2).sum(axis=1)


def initial_duals(ctx: SubproblemContext, cfg: SystemConfig) -> DualState:
    k, ell = ctx.n_users, ctx.n_ers
    zero_common = 0.0 if ctx.sdma else 1.0
    return DualState(
        beta=np.full(k, 1.0 / k),
        rho=np.full(k, cfg.dual_init_rho * zero_common),
        mu=np.full(k, cfg.dual_init_mu * zero_common),
        omega_dual=cfg.dual_init_omega,
        eta=np.full(ell, cfg.dual_init_eta),
    )


def lagrangian_value(point: VIPoint, ctx: SubproblemContext) -> float:
    g_c, g_p = ctx.g_values(point.P)
    d = point.dual
    val = point.r + 2.0 * ctx.lam * np.sum(np.conj(point.P) * ctx.q_mat).real
    val -= np.sum(d.beta * (point.r - point.c - g_p))
    val -= np.sum(d.rho * (point.c.sum() - g_c))
    val += np.sum(d.mu * point.c)
    val -= d.omega_dual * (np.sum(np.abs(point.P) ** 2) - ctx.p_t)
    val += np.sum(d.eta * (ctx.linearized_harvest(point.P) - ctx.e_tilde))
    return float(val)


def grad_P(point: VIPoint, ctx: SubproblemContext) -> np.ndarray:
    """dL/dP^* for every column (common first)."""
    d = point.dual
    a = ctx.hc @ point.P                         # (K, K+1)
    grad = ctx.lam * ctx.q_mat - d.omega_dual * point.P
    grad += ctx.g.T @ (d.eta[:, None] * ctx.anchor_g)
    # common column: rho-weighted common-rate surrogate terms
    grad[:, 0] += ctx.h.T @ (d.rho * ctx.s_tilde_c)
    grad[:, 0] -= ctx.h.T @ (d.rho * ctx.w_c * a[:, 0])
    # private columns: beta-weighted own terms plus shared interference terms
    grad[:, 1:] += ctx.h.T * (d.beta * ctx.s_tilde_p)[None, :]
    shared = d.beta * ctx.w_p + d.rho * ctx.w_c
    grad[:, 1:] -= ctx.h.T @ (shared[:, None] * a[:, 1:])
    return grad


def grad_scalars(point: VIPoint, ctx: SubproblemContext):
    """(dL/dc, dL/dr, dL/dz) with z stacked as (beta, rho, mu, omega, eta)."""
    g_c, g_p = ctx.g_values(point.P)
    d = point.dual
    dc = d.beta + d.mu - d.rho.sum()
    dr = 1.0 - d.beta.sum()
    dbeta = -(point.r - point.c - g_p)
    drho = -(point.c.sum() - g_c)
    dmu = point.c.copy()
    domega = -(np.sum(np.abs(point.P) ** 2) - ctx.p_t)
    deta = ctx.linearized_harvest(point.P) - ctx.e_tilde
    dz = np.concatenate([dbeta, drho, dmu, [domega], deta])
    return dc, dr, dz


# ---------------------------------------------------------------------------
# real stacking: [Re p_c, Im p_c, Re p_1..Re p_K, Im p_1..Im p_K, c, r,
#                 beta, rho, mu, omega, eta]
# ---------------------------------------------------------------------------

def layout_sizes(n_tx: int, k: int, ell: int):
    n_primal = 2 * n_tx * (k + 1) + k + 1
    n_dual = 3 * k + 1 + ell
    return n_primal, n_dual


def stack(point: VIPoint) -> np.ndarray:
    P = point.P
    d = point.dual
    return np.concatenate([
        P[:, 0].real, P[:, 0].imag,
        P[:, 1:].real.T.ravel(), P[:, 1:].imag.T.ravel(),
        point.c, [point.r],
        d.beta, d.rho, d.mu, [d.omega_dual], d.eta,
    ])


def unstack(x: np.ndarray, n_tx: int, k: int, ell: int) -> VIPoint:
    P = np.empty((n_tx, k + 1), dtype=complex)
    pos = 0
    P[:, 0] = x[pos:pos + n_tx] + 1j * x[pos + n_tx:pos + 2 * n_tx]
    pos += 2 * n_tx
    re = x[pos:pos + k * n_tx].reshape(k, n_tx)
    pos += k * n_tx
    im = x[pos:pos + k * n_tx].reshape(k, n_tx)
    pos += k * n_tx
    P[:, 1:] = (re + 1j * im).T
    c = x[pos:pos + k]
    pos += k
    r = float(x[pos])
    pos += 1
    beta = x[pos:pos + k]
    rho = x[pos + k:pos + 2 * k]
    mu = x[pos + 2 * k:pos + 3 * k]
    omega = float(x[pos + 3 * k])
    eta = x[pos + 3 * k + 1:pos + 3 * k + 1 + ell]
    return VIPoint(P=P, c=c.copy(), r=r,
                   dual=DualState(beta.copy(), rho.copy(), mu.copy(), omega, eta.copy()))


def vi_map(x: np.ndarray, ctx: SubproblemContext) -> np.ndarray:
    """h(x): negated primal ascent directions stacked over dual descent ones.

    Fused re-implementation of (grad_P, grad_scalars) sharing intermediates;
    equality with the composed path is pinned by tests.
    """
    n_tx, k, ell = ctx.n_tx, ctx.n_users, ctx.n_ers
    pos = 2 * n_tx * (k + 1)
    P = np.empty((n_tx, k + 1), dtype=complex)
    P[:, 0] = x[:n_tx] + 1j * x[n_tx:2 * n_tx]
    re = x[2 * n_tx:2 * n_tx + k * n_tx].reshape(k, n_tx)
    im = x[2 * n_tx + k * n_tx:pos].reshape(k, n_tx)
    P[:, 1:] = (re + 1j * im).T
    c = x[pos:pos + k]
    r = x[pos + k]
    zpos = pos + k + 1
    beta = x[zpos:zpos + k]
    rho = x[zpos + k:zpos + 2 * k]
    mu = x[zpos + 2 * k:zpos + 3 * k]
    omega = x[zpos + 3 * k]
    eta = x[zpos + 3 * k + 1:zpos + 3 * k + 1 + ell]

    a = ctx.hc @ P                                   # (K, K+1)
    pw = np.abs(a) ** 2
    t_p = pw[:, 1:].sum(axis=1) + ctx.noise
    t_c = t_p + pw[:, 0]
    own = a[ctx._kidx, 1 + ctx._kidx]
    g_c = (ctx.j_c + 2.0 * np.sqrt(1.0 + ctx.aux.theta_c)
           * (np.conj(ctx.aux.phi_c) * a[:, 0]).real - ctx.w_c * t_c)
    g_p = (ctx.j_p + 2.0 * np.sqrt(1.0 + ctx.aux.theta_p)
           * (np.conj(ctx.aux.phi_p) * own).real - ctx.w_p * t_p)
    bg = ctx.g.conj() @ P
    harvest = (2.0 * (np.conj(ctx.anchor_g) * bg).real
               - np.abs(ctx.anchor_g) ** 2).sum(axis=1)

    gp = ctx.lam * ctx.q_mat - omega * P
    gp += ctx.g.T @ (eta[:, None] * ctx.anchor_g)
    gp[:, 0] += ctx.h.T @ (rho * (ctx.s_tilde_c - ctx.w_c * a[:, 0]))
    gp[:, 1:] += ctx.h.T * (beta * ctx.s_tilde_p)[None, :]
    gp[:, 1:] -= ctx.h.T @ ((beta * ctx.w_p + rho * ctx.w_c)[:, None] * a[:, 1:])

    out = np.empty(x.size)
    if ctx.sdma:
        out[:2 * n_tx] = 0.0
        out[pos:pos + k] = 0.0
    else:
        out[:n_tx] = -2.0 * gp[:, 0].real
        out[n_tx:2 * n_tx] = -2.0 * gp[:, 0].imag
        out[pos:pos + k] = -(beta + mu - rho.sum())
    out[2 * n_tx:2 * n_tx + k * n_tx] = -2.0 * gp[:, 1:].real.T.ravel()
    out[2 * n_tx + k * n_tx:pos] = -2.0 * gp[:, 1:].imag.T.ravel()
    out[pos + k] = -(1.0 - beta.sum())
    out[zpos:zpos + k] = -(r - c - g_p)
    out[zpos + k:zpos + 2 * k] = -(c.sum() - g_c)
    out[zpos + 2 * k:zpos + 3 * k] = c
    out[zpos + 3 * k] = -(float(x[:pos] @ x[:pos]) - ctx.p_t)
    out[zpos + 3 * k + 1:] = harvest - ctx.e_tilde
    return out


def scale_duals(x: np.ndarray, ctx: SubproblemContext) -> np.ndarray:
    """Map a stacked iterate into preconditioned dual coordinates z' = S z."""
    n_primal, _ = layout_sizes(ctx.n_tx, ctx.n_users, ctx.n_ers)
    out = x.copy()
    out[n_primal:] *= ctx.dual_scale
    return out


def unscale_duals(x: np.ndarray, ctx: SubproblemContext) -> np.ndarray:
    """Inverse of scale_duals: back to plain multiplier units."""
    n_primal, _ = layout_sizes(ctx.n_tx, ctx.n_users, ctx.n_ers)
    out = x.copy()
    out[n_primal:] /= ctx.dual_scale
    return out


def vi_map_scaled(x: np.ndarray, ctx: SubproblemContext) -> np.ndarray:
    """The VI map in preconditioned coordinates.

    With z' = S z the dual block of the map picks up a factor S^{-1} and the
    multipliers feeding the primal gradients are recovered as z = S^{-1} z';
    the saddle set is unchanged while the rows become comparably scaled.
    """
    n_primal, _ = layout_sizes(ctx.n_tx, ctx.n_users, ctx.n_ers)
    h = vi_map(unscale_duals(x, ctx), ctx)
    h[n_primal:] /= ctx.dual_scale
    return h


def project(x: np.ndarray, ctx: SubproblemContext) -> np.ndarray:
    """Clip dual coordinates at zero; primal coordinates are unconstrained."""
    n_primal, _ = layout_sizes(ctx.n_tx, ctx.n_users, ctx.n_ers)
    out = x.copy()
    np.maximum(out[n_primal:], 0.0, out=out[n_primal:])
    if ctx.sdma:
        # keep the common precoder, the common-rate split, and their duals off
        n_tx, k = ctx.n_tx, ctx.n_users
        out[:2 * n_tx] = 0.0
        out[2 * n_tx * (k + 1):2 * n_tx * (k + 1) + k] = 0.0  # c
        out[n_primal + k:n_primal + 3 * k] = 0.0              # rho, mu
    return out


def eg_step(x: np.ndarray, ctx: SubproblemContext, sigma_prev: float):
    """One prediction-correction step on preconditioned coordinates.

    Returns (x_next, sigma_used, residual). Prediction reuses the previous
    step size; the adaptive size is computed afterwards from the pair
    (x, prediction), capped at the configured value.
    """
    hx = vi_map_scaled(x, ctx)
    x_bar = project(x - sigma_prev * hx, ctx)
    h_bar = vi_map_scaled(x_bar, ctx)
    dh = float(np.linalg.norm(hx - h_bar))
    if dh == 0.0:
        sigma = ctx.step_cap
    else:
        dx = float(np.linalg.norm(x - x_bar))
        sigma = min(ctx.step_shrink * dx / dh, ctx.step_cap)
    x_next = project(x - sigma * h_bar, ctx)
    residual = float(np.linalg.norm(x_next - x))
    return x_next, sigma, residual


def bilinear_saddle_demo(n_steps: int = 10_000, start=(1.0, 1.0),
                         step_cap: float = 0.1, step_shrink: float = 0.9):
    """Run the prediction-correction update on min_u max_v u*v.

    The plain gradient method orbits this saddle instead of converging; the
    extragradient correction contracts to (0, 0). Used as a self-contained
    sanity check of the update rule with the same adaptive step as the full
    solver. Returns (final point, final residual, steps used).
    """
    x = np.asarray(start, dtype=float)
    h = lambda v: np.array([v[1], -v[0]])
    sigma = step_cap
    residual = np.inf
    for n in range(1, n_steps + 1):
        hx = h(x)
        x_bar = x - sigma * hx
        h_bar = h(x_bar)
        dh = float(np.linalg.norm(hx - h_bar))
        if dh == 0.0:
            sigma = step_cap
        else:
            sigma = min(step_shrink * float(np.linalg.norm(x - x_bar)) / dh,
                        step_cap)
        x_next = x - sigma * h_bar
        residual = float(np.linalg.norm(x_next - x))
        x = x_next
        if residual < 1e-16:
            break
    return x, residual, n


@dataclass
class SolveRecord:
    iterations: int
    converged: bool
    wall_steps: float = 0.0        # time spent inside the stepping loop only
    objective_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    sigma_trace: list = field(default_factory=list)

    def trace_rows(self):
        """CSV-ready rows: (iteration, objective, residual, sigma_used)."""
        return [
            (i, o, res, sg)
            for i, (o, res, sg) in enumerate(
                zip(self.objective_trace, self.residual_trace, self.sigma_trace))
        ]


def solve_subproblem(start: VIPoint, ctx: SubproblemContext, eps3: float,
                     max_iters: int, keep_trace: bool = False,
                     check_window: int = 50):
    """Extragradient iterations until the true objective stalls below eps3.

    The stall test compares objective values `check_window` iterations apart:
    single extragradient steps move the objective by far less than eps3 long
    before the saddle is reached, so a per-step test stops spuriously. The
    objective alone is also blind to constraint violations (notably the
    harvest constraints), so a stalled iterate only counts as converged once
    every subproblem slack — the dual block of the VI map — is above -eps3.
    """
    x = project(scale_duals(stack(start), ctx), ctx)
    sigma = ctx.step_cap
    point = unstack(unscale_duals(x, ctx), ctx.n_tx, ctx.n_users, ctx.n_ers)
    f3 = ctx.objective_fn(point.P, point.c)
    record = SolveRecord(iterations=0, converged=False)
    use_kernel = _kernel.HAVE_KERNEL and not keep_trace
    kargs = ctx.kernel_args() if use_kernel else None
    n = 0
    while n < max_iters:
        t0 = time.perf_counter()
        if use_kernel:
            block = min(check_window - n % check_window, max_iters - n)
            sigma, residual = _kernel.run_steps(x, sigma, block, *kargs)
            n += block
        else:
            x, sigma, residual = eg_step(x, ctx, sigma)
            n += 1
        record.wall_steps += time.perf_counter() - t0
        record.iterations = n
        if keep_trace:
            point = unstack(unscale_duals(x, ctx), ctx.n_tx, ctx.n_users, ctx.n_ers)
            f3_now = ctx.objective_fn(point.P, point.c)
            record.objective_trace.append(f3_now)
            record.residual_trace.append(residual)
            record.sigma_trace.append(sigma)
        if n % check_window == 0 or n == max_iters:
            point = unstack(unscale_duals(x, ctx), ctx.n_tx, ctx.n_users, ctx.n_ers)
            f3_new = ctx.objective_fn(point.P, point.c)
            if abs(f3_new - f3) < eps3 and residual < eps3:
                n_primal, _ = layout_sizes(ctx.n_tx, ctx.n_users, ctx.n_ers)
                slacks = vi_map(unscale_duals(x, ctx), ctx)[n_primal:]
                # the power row is omitted: the sphere renormalization that
                # follows every inner solve enforces that constraint exactly
                slacks[3 * ctx.n_users] = 0.0
                if slacks.min() > -eps3:
                    record.converged = True
                    f3 = f3_new
                    break
            f3 = f3_new
    point = unstack(unscale_duals(x, ctx), ctx.n_tx, ctx.n_users, ctx.n_ers)
    return point, record
