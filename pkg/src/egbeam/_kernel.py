"""Compiled extragradient stepping for the inner saddle-point solver.

The flat iterate is small (a few hundred reals at default sizes), so the
pure-numpy step is dominated by per-call dispatch overhead rather than
arithmetic. This module provides an njit kernel that advances the iterate
by a whole block of prediction-correction steps per call. It is an exact
re-implementation of ``dual_eg.eg_step`` on the same stacking layout; the
agreement between the two paths is pinned by tests. When numba is missing
the solver silently falls back to the numpy loop.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_KERNEL = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    HAVE_KERNEL = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True, inline='always')
def _vi(x, out, hc, h, g, anchor_g, lam_q, j_c, j_p, w_c, w_p,
        st_c, st_p, e_off, noise, p_t, sdma, inv_scale,
        P, a, gp_m, z, sh):
    # x carries preconditioned dual coordinates z' = S z; multipliers are
    # recovered as z'/S and the dual rows of the map are divided by S
    # (both applied as multiplication by the precomputed reciprocal).
    k, n_tx = hc.shape
    ell = g.shape[0]
    ncols = k + 1
    pos = 2 * n_tx * ncols
    zpos = pos + k + 1
    base_re = 2 * n_tx
    base_im = 2 * n_tx + k * n_tx

    for i in range(n_tx):
        P[i, 0] = complex(x[i], x[n_tx + i])
    for j in range(k):
        off_r = base_re + j * n_tx
        off_i = base_im + j * n_tx
        for i in range(n_tx):
            P[i, j + 1] = complex(x[off_r + i], x[off_i + i])

    c = x[pos:pos + k]
    r = x[pos + k]
    n_dual = 3 * k + 1 + ell
    for i in range(n_dual):
        z[i] = x[zpos + i] * inv_scale[i]
    beta = z[:k]
    rho = z[k:2 * k]
    mu = z[2 * k:3 * k]
    omega = z[3 * k]
    eta = z[3 * k + 1:]

    csum = 0.0
    rsum = 0.0
    bsum = 0.0
    for kk in range(k):
        csum += c[kk]
        rsum += rho[kk]
        bsum += beta[kk]

    for kk in range(k):
        for col in range(ncols):
            v = 0.0 + 0.0j
            for i in range(n_tx):
                v += hc[kk, i] * P[i, col]
            a[kk, col] = v

    # dual rows: constraint slacks with flipped sign
    for kk in range(k):
        tp = noise
        for col in range(1, ncols):
            av = a[kk, col]
            tp += av.real * av.real + av.imag * av.imag
        a0 = a[kk, 0]
        tc = tp + a0.real * a0.real + a0.imag * a0.imag
        gc = j_c[kk] + 2.0 * (np.conj(st_c[kk]) * a0).real - w_c[kk] * tc
        own = a[kk, 1 + kk]
        gp = j_p[kk] + 2.0 * (np.conj(st_p[kk]) * own).real - w_p[kk] * tp
        out[zpos + kk] = -(r - c[kk] - gp)
        out[zpos + k + kk] = -(csum - gc)
        out[zpos + 2 * k + kk] = c[kk]
    for el in range(ell):
        s = 0.0
        for col in range(ncols):
            bg = 0.0 + 0.0j
            for i in range(n_tx):
                bg += np.conj(g[el, i]) * P[i, col]
            s += 2.0 * (np.conj(anchor_g[el, col]) * bg).real
        out[zpos + 3 * k + 1 + el] = s - e_off[el]
    pw = 0.0
    for i in range(pos):
        pw += x[i] * x[i]
    out[zpos + 3 * k] = -(pw - p_t)

    # primal rows: negated ascent directions (2x the conjugate derivative)
    for i in range(n_tx):
        for col in range(ncols):
            v = lam_q[i, col] - omega * P[i, col]
            for el in range(ell):
                v += g[el, i] * eta[el] * anchor_g[el, col]
            gp_m[i, col] = v
    for kk in range(k):
        sh[kk] = beta[kk] * w_p[kk] + rho[kk] * w_c[kk]
    for kk in range(k):
        coef = rho[kk] * (st_c[kk] - w_c[kk] * a[kk, 0])
        for i in range(n_tx):
            gp_m[i, 0] += h[kk, i] * coef
    for j in range(k):
        own_coef = beta[j] * st_p[j]
        for i in range(n_tx):
            v = h[j, i] * own_coef
            for kk in range(k):
                v -= h[kk, i] * (sh[kk] * a[kk, 1 + j])
            gp_m[i, 1 + j] += v

    if sdma:
        for i in range(2 * n_tx):
            out[i] = 0.0
        for kk in range(k):
            out[pos + kk] = 0.0
    else:
        for i in range(n_tx):
            out[i] = -2.0 * gp_m[i, 0].real
            out[n_tx + i] = -2.0 * gp_m[i, 0].imag
        for kk in range(k):
            out[pos + kk] = -(beta[kk] + mu[kk] - rsum)
    for j in range(k):
        off_r = base_re + j * n_tx
        off_i = base_im + j * n_tx
        for i in range(n_tx):
            out[off_r + i] = -2.0 * gp_m[i, 1 + j].real
            out[off_i + i] = -2.0 * gp_m[i, 1 + j].imag
    out[pos + k] = -(1.0 - bsum)
    for i in range(n_dual):
        out[zpos + i] *= inv_scale[i]


@njit(cache=True, inline='always')
def _clip(x, n_tx, k, n_primal, sdma):
    for i in range(n_primal, x.size):
        if x[i] < 0.0:
            x[i] = 0.0
    if sdma:
        for i in range(2 * n_tx):
            x[i] = 0.0
        pos = 2 * n_tx * (k + 1)
        for i in range(pos, pos + k):
            x[i] = 0.0
        for i in range(n_primal + k, n_primal + 3 * k):
            x[i] = 0.0


@njit(cache=True)
def run_steps(x, sigma_prev, n_steps, hc, h, g, anchor_g, lam_q,
              j_c, j_p, w_c, w_p, st_c, st_p, e_off,
              noise, p_t, step_shrink, step_cap, sdma, dual_scale):
    """Advance x in place by n_steps prediction-correction iterations.

    Returns the last step size and the last correction residual.
    """
    n = x.size
    k, n_tx = hc.shape
    n_primal = 2 * n_tx * (k + 1) + k + 1
    hx = np.empty(n)
    xb = np.empty(n)
    hb = np.empty(n)
    inv_scale = 1.0 / dual_scale
    ncols = k + 1
    ell = g.shape[0]
    P = np.empty((n_tx, ncols), dtype=np.complex128)
    a = np.empty((k, ncols), dtype=np.complex128)
    gp_m = np.empty((n_tx, ncols), dtype=np.complex128)
    z = np.empty(3 * k + 1 + ell)
    sh = np.empty(k)
    sigma = sigma_prev
    residual = 0.0
    for _ in range(n_steps):
        _vi(x, hx, hc, h, g, anchor_g, lam_q, j_c, j_p, w_c, w_p,
            st_c, st_p, e_off, noise, p_t, sdma, inv_scale,
            P, a, gp_m, z, sh)
        for i in range(n):
            xb[i] = x[i] - sigma * hx[i]
        _clip(xb, n_tx, k, n_primal, sdma)
        _vi(xb, hb, hc, h, g, anchor_g, lam_q, j_c, j_p, w_c, w_p,
            st_c, st_p, e_off, noise, p_t, sdma, inv_scale,
            P, a, gp_m, z, sh)
        dh = 0.0
        dx = 0.0
        for i in range(n):
            d1 = hx[i] - hb[i]
            dh += d1 * d1
            d2 = x[i] - xb[i]
            dx += d2 * d2
        dh = np.sqrt(dh)
        if dh == 0.0:
            sigma = step_cap
        else:
            sigma = min(step_shrink * np.sqrt(dx) / dh, step_cap)
        res = 0.0
        for i in range(n):
            v = x[i] - sigma * hb[i]
            xb[i] = v
        _clip(xb, n_tx, k, n_primal, sdma)
        for i in range(n):
            d = xb[i] - x[i]
            res += d * d
            x[i] = xb[i]
        residual = np.sqrt(res)
    return sigma, residual
