"""Independent verification machinery kept off the solver code paths:
central finite differences, a definition-level Fisher information build, and
a random-search baseline for tiny convex subproblems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Scenario
from .dual_eg import SubproblemContext, VIPoint, DualState
from .errors import NonFiniteEvaluation, NoFeasibleSample
from .sensing import steering


@dataclass
class FdSpec:
    step: float = 1e-6
    rel_tol: float = 1e-5

    def __post_init__(self):
        if self.step <= 0 or self.rel_tol <= 0:
            raise ValueError("step and rel_tol must be positive")


def fd_gradient(f, x: np.ndarray, spec: FdSpec = FdSpec()) -> np.ndarray:
    """Central-difference gradient of a scalar function of stacked reals."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = spec.step
        hi, lo = f(x + e), f(x - e)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NonFiniteEvaluation(f"non-finite evaluation at coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * spec.step)
    return grad


def fim_by_definition(P_mat: np.ndarray, s: Scenario, n_rx: int | None = None) -> np.ndarray:
    """Fisher information built column-by-column from the echo derivatives.

    For each transmitted stream the echo is alpha * A @ p; stacking the
    derivatives w.r.t. (theta, Re alpha, Im alpha) and summing the Gram
    matrices over streams replaces the expectation over unit-power symbols.
    """
    n_tx = P_mat.shape[0]
    if n_rx is None:
        n_rx = n_tx
    sp = steering(s.theta, n_tx, n_rx)
    a_mat = np.outer(sp.a_rx, sp.a_tx.conj())
    da_mat = np.outer(sp.da_rx, sp.a_tx.conj()) + np.outer(sp.a_rx, sp.da_tx.conj())
    kappa = 2.0 / s.noise_sense
    f = np.zeros((3, 3))
    for m in range(P_mat.shape[1]):
        p = P_mat[:, m]
        jac = np.column_stack([s.alpha * (da_mat @ p), a_mat @ p, 1j * (a_mat @ p)])
        f += kappa * (jac.conj().T @ jac).real
    return f


def subproblem_objective(point: VIPoint, ctx: SubproblemContext) -> float:
    """Value of the convex surrogate: min_k(g_p,k + c_k) + sensing term."""
    _, g_p = ctx.g_values(point.P)
    sense = 2.0 * ctx.lam * np.sum(np.conj(point.P) * ctx.q_mat).real
    return float(np.min(g_p + point.c) + sense)


def subproblem_feasible(point: VIPoint, ctx: SubproblemContext, tol: float = 1e-9) -> bool:
    g_c, _ = ctx.g_values(point.P)
    if np.any(point.c < -tol):
        return False
    if point.c.sum() > g_c.min() + tol:
        return False
    if np.sum(np.abs(point.P) ** 2) > ctx.p_t + tol:
        return False
    return bool(np.all(ctx.linearized_harvest(point.P) >= ctx.e_tilde - tol))


def subproblem_random_search(ctx: SubproblemContext, budget: int,
                             seed: int = 0, refine_steps: int = 200) -> tuple[VIPoint, float]:
    """Best feasible point from random sampling plus coordinate refinement.

    Oracle-scale only (tiny instances); samples precoders on the power sphere
    with random common-rate splits, keeps feasible ones, then polishes the
    best by axis-aligned coordinate descent with feasibility rejection.
    """
    if ctx.n_users > 2 or ctx.n_tx > 3 or ctx.n_ers > 1:
        raise ValueError("random-search oracle is limited to tiny instances")
    rng = np.random.default_rng(seed)
    k, n_tx, ell = ctx.n_users, ctx.n_tx, ctx.n_ers
    best, best_val = None, -np.inf
    for _ in range(budget):
        raw = rng.standard_normal((n_tx, k + 1)) + 1j * rng.standard_normal((n_tx, k + 1))
        if ctx.sdma:
            raw[:, 0] = 0.0
        P = np.sqrt(ctx.p_t) * raw / np.linalg.norm(raw)
        c = np.zeros(k)
        if not ctx.sdma:
            g_c, _ = ctx.g_values(P)
            cap = max(g_c.min(), 0.0)
            c = rng.dirichlet(np.ones(k)) * cap * rng.uniform()
        cand = VIPoint(P=P, c=c, r=0.0,
                       dual=DualState(np.zeros(k), np.zeros(k), np.zeros(k),
                                      0.0, np.zeros(ell)))
        if not subproblem_feasible(cand, ctx):
            continue
        val = subproblem_objective(cand, ctx)
        if val > best_val:
            best, best_val = cand, val
    if best is None:
        raise NoFeasibleSample(f"no feasible sample within budget {budget}")
    return _coordinate_refine(best, ctx, refine_steps)


def _coordinate_refine(point: VIPoint, ctx: SubproblemContext, sweeps: int):
    """Axis-aligned descent over the real-stacked primal coordinates."""
    from .dual_eg import stack, unstack, layout_sizes

    x = stack(point)
    n_primal, _ = layout_sizes(ctx.n_tx, ctx.n_users, ctx.n_ers)
    best_val = subproblem_objective(point, ctx)
    step = 0.5 * np.sqrt(ctx.p_t)
    for _ in range(sweeps):
        improved = False
        for i in range(n_primal - 1):  # skip r: it is implied by min_k
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[i] += sgn * step
                cand = unstack(trial, ctx.n_tx, ctx.n_users, ctx.n_ers)
                if not subproblem_feasible(cand, ctx):
                    continue
                val = subproblem_objective(cand, ctx)
                if val > best_val + 1e-12:
                    x, best_val, improved = trial, val, True
                    break
        if not improved:
            step *= 0.5
            if step < 1e-6:
                break
    return unstack(x, ctx.n_tx, ctx.n_users, ctx.n_ers), best_val
