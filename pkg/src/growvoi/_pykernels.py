"""Pure-Python/numpy implementations of the hot kernels.

Signatures mirror ``_ckernels``; ``growvoi.kernels`` picks one at import.
"""
import math

import numpy as np

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

# status codes shared with the compiled kernels
OK = 0
MAXITER = 1
SINGULAR = 2


def riccati_scalar(d, f, g, h, sigma0, tol, max_iter):
    """Iterate the scalar covariance recursion to a fixed point.

    Returns ``(sigma, iterations, residual, status)``.  Convergence is
    declared once ``|step| <= tol * max(1, sigma)``.
    """
    d = float(d); f = float(f); g = float(g); h = float(h)
    hh = h * h
    ff = f * f
    s = float(sigma0)
    resid = math.inf
    for it in range(1, max_iter + 1):
        den = g * g * s + hh
        if den <= 0.0:
            return s, it - 1, resid, SINGULAR
        k = d * s * g / den
        a = d - k * g
        nxt = a * a * s + k * k * hh + ff
        resid = abs(nxt - s)
        s = nxt
        if resid <= tol * max(1.0, s):
            return s, it, resid, OK
    return s, max_iter, resid, MAXITER


def _locate(grid, x):
    """Cell index and weight for linear interpolation, with clamping."""
    n = grid.shape[0]
    if n == 1:
        z = np.zeros(np.shape(x), dtype=np.intp)
        return z, np.zeros(np.shape(x)), (x != grid[0])
    lo, hi = grid[0], grid[-1]
    out = (x < lo) | (x > hi)
    xc = np.clip(x, lo, hi)
    i = np.clip(np.searchsorted(grid, xc, side="right") - 1, 0, n - 2)
    w = (xc - grid[i]) / (grid[i + 1] - grid[i])
    return i, w, out


def interp2(V, mu_grid, sigma_grid, mu, sigma):
    """Bilinear interpolation of ``V`` with clamping; returns ``(values, clamped)``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    mu, sigma = np.broadcast_arrays(mu, sigma)
    i, wm, om = _locate(mu_grid, mu)
    j, ws, os_ = _locate(sigma_grid, sigma)
    n_mu, n_sig = V.shape
    i1 = np.minimum(i + 1, n_mu - 1)
    j1 = np.minimum(j + 1, n_sig - 1)
    v = ((1 - wm) * (1 - ws) * V[i, j] + wm * (1 - ws) * V[i1, j]
         + (1 - wm) * ws * V[i, j1] + wm * ws * V[i1, j1])
    return v, om | os_


def _objective(p, MU, SG, V, mu_grid, sigma_grid, d, f, h, b, c, delta, nodes, weights):
    a = b * b * p * p + h * h
    tot = SG + a
    pos = tot > 0.0
    safe = np.where(pos, tot, 1.0)
    K = np.where(pos, SG / safe, 0.0)
    spread = np.where(pos, SG / np.sqrt(safe), 0.0)
    sig_next = d * d * (1.0 - K) * SG + f * f
    mu_next = d * (MU[..., None] + spread[..., None] * nodes)
    vals, clamped = interp2(V, mu_grid, sigma_grid, mu_next, sig_next[..., None])
    ev = vals @ weights
    return (p - c) * (MU - b * p) + delta * ev, clamped


def _golden(lo, hi, n_golden, args):
    x1 = hi - INVPHI * (hi - lo)
    x2 = lo + INVPHI * (hi - lo)
    f1 = _objective(x1, *args)[0]
    f2 = _objective(x2, *args)[0]
    for _ in range(n_golden):
        left = f1 > f2  # maximum lies in [lo, x2]
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        probe = np.where(left, hi - INVPHI * (hi - lo), lo + INVPHI * (hi - lo))
        fp = _objective(probe, *args)[0]
        x1, x2 = np.where(left, probe, x2), np.where(left, x1, probe)
        f1, f2 = np.where(left, fp, f2), np.where(left, f1, fp)
    p = 0.5 * (lo + hi)
    v, clamped = _objective(p, *args)
    return p, v, clamped


def bellman_sweep(V, mu_grid, sigma_grid, d, f, h, b, c, delta,
                  nodes, weights, p_lo, p_hi, n_golden, n_scan):
    """One synchronous Bellman update with a global price search.

    The bracket ``[p_lo, p_hi]`` (per mu node) is scanned at ``n_scan + 1``
    evenly spaced prices; the best scan point and the best other scan-local
    maximum are each refined by ``n_golden`` golden-section steps on their
    two neighbouring scan cells, and the better of the two is kept.
    Returns ``(V_new, policy, n_clamped)`` where ``n_clamped`` counts clamped
    (node, quadrature point) pairs at the chosen prices.
    """
    if n_scan < 1:
        raise ValueError("n_scan must be at least 1")
    V = np.ascontiguousarray(V, dtype=float)
    MU = np.broadcast_to(mu_grid[:, None], V.shape)
    SG = np.broadcast_to(sigma_grid[None, :], V.shape)
    args = (MU, SG, V, mu_grid, sigma_grid, d, f, h, b, c, delta, nodes, weights)
    p_lo = np.broadcast_to(np.asarray(p_lo, dtype=float)[:, None], V.shape)
    p_hi = np.broadcast_to(np.asarray(p_hi, dtype=float)[:, None], V.shape)
    step = (p_hi - p_lo) / n_scan

    F = np.stack([_objective(p_lo + q * step, *args)[0] for q in range(n_scan + 1)])
    best = np.argmax(F, axis=0)
    left_ok = np.concatenate([np.ones((1,) + V.shape, bool), F[1:] > F[:-1]])
    right_ok = np.concatenate([F[:-1] >= F[1:], np.ones((1,) + V.shape, bool)])
    peak = left_ok & right_ok
    q_idx = np.arange(n_scan + 1)[:, None, None]
    cand = np.where(peak & (q_idx != best), F, -np.inf)
    second = np.argmax(cand, axis=0)
    has_second = np.isfinite(np.max(cand, axis=0))
    second = np.where(has_second, second, best)

    def refine(k):
        lo = p_lo + np.maximum(k - 1, 0) * step
        hi = p_lo + np.minimum(k + 1, n_scan) * step
        return _golden(lo, hi, n_golden, args)

    pa, va, ca = refine(best)
    pb, vb, cb = refine(second)
    take_b = has_second & (vb > va)
    p = np.where(take_b, pb, pa)
    v = np.where(take_b, vb, va)
    clamped = np.where(take_b[..., None], cb, ca)
    return v, p, int(np.count_nonzero(clamped))
