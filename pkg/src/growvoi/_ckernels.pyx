# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: scalar Riccati iteration and the Bellman sweep.

Same algorithms and status codes as ``_pykernels``.
"""
import numpy as np
from libc.math cimport sqrt, fabs, INFINITY

cdef double INVPHI = (sqrt(5.0) - 1.0) / 2.0

OK = 0
MAXITER = 1
SINGULAR = 2


def riccati_scalar(double d, double f, double g, double h, double sigma0,
                   double tol, long max_iter):
    cdef double hh = h * h, ff = f * f, s = sigma0, resid = INFINITY
    cdef double den, k, a, nxt, scale
    cdef long it
    with nogil:
        for it in range(1, max_iter + 1):
            den = g * g * s + hh
            if den <= 0.0:
                with gil:
                    return s, it - 1, resid, SINGULAR
            k = d * s * g / den
            a = d - k * g
            nxt = a * a * s + k * k * hh + ff
            resid = fabs(nxt - s)
            s = nxt
            scale = s if s > 1.0 else 1.0
            if resid <= tol * scale:
                with gil:
                    return s, it, resid, OK
    return s, max_iter, resid, MAXITER


cdef inline Py_ssize_t _cell(const double[::1] grid, double x, double inv_dx,
                             double* w, bint* out) noexcept nogil:
    """Cell index of ``x`` (clamped) and its interpolation weight.

    ``inv_dx > 0`` marks a uniform grid and enables a direct lookup.
    """
    cdef Py_ssize_t n = grid.shape[0], lo, hi, mid
    if n == 1:
        w[0] = 0.0
        out[0] = x != grid[0]
        return 0
    if x < grid[0]:
        out[0] = True
        x = grid[0]
    elif x > grid[n - 1]:
        out[0] = True
        x = grid[n - 1]
    else:
        out[0] = False
    if inv_dx > 0.0:
        lo = <Py_ssize_t>((x - grid[0]) * inv_dx)
        if lo > n - 2:
            lo = n - 2
        # guard against rounding at cell edges
        while lo > 0 and grid[lo] > x:
            lo -= 1
        while lo < n - 2 and grid[lo + 1] <= x:
            lo += 1
    else:
        # largest i with grid[i] <= x, capped at n - 2
        lo = 0
        hi = n - 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if grid[mid] <= x:
                lo = mid
            else:
                hi = mid
    w[0] = (x - grid[lo]) / (grid[lo + 1] - grid[lo])
    return lo


cdef inline double _interp(const double[:, ::1] V, const double[::1] mu_grid,
                           double mu_inv_dx, Py_ssize_t j, Py_ssize_t j1, double ws,
                           double m, bint* out) noexcept nogil:
    cdef double wm
    cdef Py_ssize_t i, i1
    i = _cell(mu_grid, m, mu_inv_dx, &wm, out)
    i1 = i + 1 if mu_grid.shape[0] > 1 else i
    return ((1 - wm) * (1 - ws) * V[i, j] + wm * (1 - ws) * V[i1, j]
            + (1 - wm) * ws * V[i, j1] + wm * ws * V[i1, j1])


cdef double _objective(double p, double mu, double sg,
                       const double[:, ::1] V, const double[::1] mu_grid,
                       const double[::1] sigma_grid, double mu_inv_dx,
                       double d, double f, double h, double b, double c, double delta,
                       const double[::1] nodes, const double[::1] weights,
                       int* n_out) noexcept nogil:
    cdef double a = b * b * p * p + h * h
    cdef double tot = sg + a, K = 0.0, spread = 0.0, sig_next, ws, ev = 0.0
    cdef Py_ssize_t j, j1, q
    cdef bint out_s, out_m
    if tot > 0.0:
        K = sg / tot
        spread = sg / sqrt(tot)
    sig_next = d * d * (1.0 - K) * sg + f * f
    j = _cell(sigma_grid, sig_next, 0.0, &ws, &out_s)
    j1 = j + 1 if sigma_grid.shape[0] > 1 else j
    n_out[0] = 0
    for q in range(nodes.shape[0]):
        ev += weights[q] * _interp(V, mu_grid, mu_inv_dx, j, j1, ws, d * (mu + spread * nodes[q]), &out_m)
        if out_m or out_s:
            n_out[0] += 1
    return (p - c) * (mu - b * p) + delta * ev


def _uniform_inv_step(g):
    """``1/step`` for a uniform grid, else 0."""
    if g.shape[0] < 3:
        return 0.0
    dx = np.diff(g)
    if np.all(np.abs(dx - dx[0]) <= 1e-12 * np.abs(dx[0])):
        return 1.0 / ((g[-1] - g[0]) / (g.shape[0] - 1))
    return 0.0


cdef inline void _golden(double lo, double hi, int n_golden, double mu, double sg,
                         const double[:, ::1] V, const double[::1] mu_grid,
                         const double[::1] sigma_grid, double mu_inv_dx,
                         double d, double f, double h, double b, double c, double delta,
                         const double[::1] nodes, const double[::1] weights,
                         double* p_out, double* v_out, int* n_out) noexcept nogil:
    cdef double x1 = hi - INVPHI * (hi - lo), x2 = lo + INVPHI * (hi - lo)
    cdef double f1, f2, probe, fp
    cdef int it
    f1 = _objective(x1, mu, sg, V, mu_grid, sigma_grid, mu_inv_dx, d, f, h, b, c, delta, nodes, weights, n_out)
    f2 = _objective(x2, mu, sg, V, mu_grid, sigma_grid, mu_inv_dx, d, f, h, b, c, delta, nodes, weights, n_out)
    for it in range(n_golden):
        if f1 > f2:
            hi = x2
            probe = hi - INVPHI * (hi - lo)
            fp = _objective(probe, mu, sg, V, mu_grid, sigma_grid, mu_inv_dx, d, f, h, b, c, delta, nodes, weights, n_out)
            x2 = x1
            f2 = f1
            x1 = probe
            f1 = fp
        else:
            lo = x1
            probe = lo + INVPHI * (hi - lo)
            fp = _objective(probe, mu, sg, V, mu_grid, sigma_grid, mu_inv_dx, d, f, h, b, c, delta, nodes, weights, n_out)
            x1 = x2
            f1 = f2
            x2 = probe
            f2 = fp
    p_out[0] = 0.5 * (lo + hi)
    v_out[0] = _objective(p_out[0], mu, sg, V, mu_grid, sigma_grid, mu_inv_dx, d, f, h, b, c, delta, nodes, weights, n_out)


def bellman_sweep(V_in, mu_grid_in, sigma_grid_in, double d, double f, double h,
                  double b, double c, double delta, nodes_in, weights_in,
                  p_lo_in, p_hi_in, int n_golden, int n_scan):
    cdef const double[:, ::1] V = np.ascontiguousarray(V_in, dtype=np.float64)
    cdef const double[::1] mu_grid = np.ascontiguousarray(mu_grid_in, dtype=np.float64)
    cdef const double[::1] sigma_grid = np.ascontiguousarray(sigma_grid_in, dtype=np.float64)
    cdef const double[::1] nodes = np.ascontiguousarray(nodes_in, dtype=np.float64)
    cdef const double[::1] weights = np.ascontiguousarray(weights_in, dtype=np.float64)
    cdef const double[::1] p_lo = np.ascontiguousarray(p_lo_in, dtype=np.float64)
    cdef const double[::1] p_hi = np.ascontiguousarray(p_hi_in, dtype=np.float64)
    cdef Py_ssize_t n_mu = V.shape[0], n_sig = V.shape[1], i, k, q
    cdef int n_out, n_out2, best, second
    cdef long clamped = 0
    cdef double mu, sg, step, pa, va, pb, vb
    cdef double mu_inv_dx = _uniform_inv_step(np.asarray(mu_grid_in, dtype=np.float64))
    if n_scan < 1:
        raise ValueError("n_scan must be at least 1")
    scan_buf = np.empty(n_scan + 1)
    cdef double[::1] F = scan_buf

    out_V = np.empty((n_mu, n_sig))
    out_p = np.empty((n_mu, n_sig))
    cdef double[:, ::1] Vn = out_V
    cdef double[:, ::1] P = out_p

    with nogil:
        for i in range(n_mu):
            mu = mu_grid[i]
            step = (p_hi[i] - p_lo[i]) / n_scan
            for k in range(n_sig):
                sg = sigma_grid[k]
                # coarse scan, then refine the two best scan peaks
                for q in range(n_scan + 1):
                    F[q] = _objective(p_lo[i] + q * step, mu, sg, V, mu_grid, sigma_grid, mu_inv_dx,
                                      d, f, h, b, c, delta, nodes, weights, &n_out)
                best = 0
                for q in range(1, n_scan + 1):
                    if F[q] > F[best]:
                        best = q
                second = -1
                for q in range(n_scan + 1):
                    if q == best:
                        continue
                    if (q == 0 or F[q] > F[q - 1]) and (q == n_scan or F[q] >= F[q + 1]):
                        if second < 0 or F[q] > F[second]:
                            second = q
                _golden(p_lo[i] + (best - 1 if best > 0 else 0) * step,
                        p_lo[i] + (best + 1 if best < n_scan else n_scan) * step,
                        n_golden, mu, sg, V, mu_grid, sigma_grid, mu_inv_dx,
                        d, f, h, b, c, delta, nodes, weights, &pa, &va, &n_out)
                if second >= 0:
                    _golden(p_lo[i] + (second - 1 if second > 0 else 0) * step,
                            p_lo[i] + (second + 1 if second < n_scan else n_scan) * step,
                            n_golden, mu, sg, V, mu_grid, sigma_grid, mu_inv_dx,
                            d, f, h, b, c, delta, nodes, weights, &pb, &vb, &n_out2)
                    if vb > va:
                        pa = pb
                        va = vb
                        n_out = n_out2
                Vn[i, k] = va
                P[i, k] = pa
                clamped += n_out
    return out_V, out_p, int(clamped)
