"""Stage value of information and its dependence on signal noise.

Everything here is evaluated at the steady state of a single market:
``VoI(h) = K*(h)^2 S*(h)`` and the pro-rata variant ``K*(h) S*(h)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .steady_state import gain_star, sigma_star_closed_form

#: |analytic curvature| below this is classified as degenerate
ANALYTIC_ZERO = 1e-9
#: |finite-difference estimate| below this is treated as zero
NUMERIC_ZERO = 1e-6
FD_STEPS = (1e-3, 5e-4)
GOLDEN_TOL = 1e-6


class Classification(str, enum.Enum):
    MAX_AT_ZERO = "MaxAtZero"
    MIN_AT_ZERO = "MinAtZero"
    DEGENERATE = "Degenerate"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class GrowthRegion:
    g: float
    d_lower: float
    d_upper: float

    def contains(self, d: float) -> bool:
        return self.d_lower <= d <= self.d_upper


@dataclass(frozen=True)
class VoICurve:
    d: float
    f: float
    g: float
    h_grid: np.ndarray
    sigma_star: np.ndarray
    k_star: np.ndarray
    voi: np.ndarray
    pro_rata: np.ndarray
    classification: Classification
    interior_min: Optional[tuple]

    def __post_init__(self):
        n = len(self.h_grid)
        if any(len(a) != n for a in (self.sigma_star, self.k_star, self.voi, self.pro_rata)):
            raise ConfigError("VoICurve series must have equal lengths")
        if n > 1 and np.any(np.diff(self.h_grid) <= 0):
            raise ConfigError("h_grid must be strictly increasing")
        if self.interior_min is not None and self.classification is not Classification.MAX_AT_ZERO:
            raise ConfigError("interior minimum only recorded for MaxAtZero curves")


def voi_stage(K, Sigma):
    """``K Sigma K'`` for matrices, ``K^2 Sigma`` for scalars."""
    K = np.asarray(K, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if K.ndim == 0:
        return float(K * Sigma * K)
    out = K @ Sigma @ K.T
    return 0.5 * (out + out.T)


def voi_pro_rata(K, Sigma):
    """``K Sigma`` (gain not squared)."""
    K = np.asarray(K, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if K.ndim == 0:
        return float(K * Sigma)
    return K @ Sigma


def steady_voi(d, f, g, h):
    """Steady-state ``(sigma*, k*, voi, pro_rata)``; vectorised over ``h``."""
    s = sigma_star_closed_form(d, f, g, h)
    k = gain_star(d, g, h, s)
    return s, k, k * k * s, k * s


def growth_threshold(g: float) -> GrowthRegion:
    """Growth range in which the zero-noise extremum of VoI is a maximum."""
    if not g > 0:
        raise DomainError("g must be positive")
    gg = g * g
    return GrowthRegion(float(g), 1.0, math.sqrt(4 * gg * gg + 8 * gg + 3) / (2 * gg + 1))


def curvature_at_zero(d: float, g: float) -> float:
    """Closed-form second derivative of VoI in ``h`` at ``h = 0``.

    ``(d^2/g^4) (2 g^2 (d^2 - 1) + d^2 - 3)``; its sign classifies the
    zero-noise extremum.
    """
    if not g > 0:
        raise DomainError("g must be positive")
    dd, gg = d * d, g * g
    return dd / (gg * gg) * (2 * gg * (dd - 1) + dd - 3)


def second_derivative_at_zero(func, steps: Sequence[float] = FD_STEPS) -> float:
    """Richardson-refined central second difference of an even function at 0.

    Uses ``(func(s) - 2 func(0) + func(-s)) / s^2`` with ``func(-s) = func(s)``.
    The two steps must be in ratio 2:1.
    """
    s1, s2 = steps
    f0 = func(0.0)
    D1 = 2.0 * (func(s1) - f0) / (s1 * s1)
    D2 = 2.0 * (func(s2) - f0) / (s2 * s2)
    r = (s1 / s2) ** 2
    return (r * D2 - D1) / (r - 1.0)


def _sign(x: float, zero: float) -> int:
    if abs(x) <= zero:
        return 0
    return 1 if x > 0 else -1


def voi_curvature_fd(d: float, f: float, g: float) -> float:
    return second_derivative_at_zero(lambda h: steady_voi(d, f, g, h)[2])


def pro_rata_curvature_fd(d: float, f: float, g: float) -> float:
    return second_derivative_at_zero(lambda h: steady_voi(d, f, g, h)[3])


def pro_rata_curvature_sign(d: float, f: float, g: float) -> int:
    """Sign of the zero-noise second derivative of ``K* S*`` (finite differences)."""
    return _sign(pro_rata_curvature_fd(d, f, g), NUMERIC_ZERO)


def classify(d: float, g: float) -> Classification:
    k = curvature_at_zero(d, g)
    if abs(k) < ANALYTIC_ZERO:
        return Classification.DEGENERATE
    return Classification.MAX_AT_ZERO if k < 0 else Classification.MIN_AT_ZERO


def golden_min(func, a: float, b: float, tol: float = GOLDEN_TOL):
    """Golden-section minimisation of a unimodal function on ``[a, b]``."""
    invphi = (math.sqrt(5) - 1) / 2
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = func(x1), func(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = func(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = func(x2)
    x = 0.5 * (a + b)
    return x, func(x)


def _bracket_minimum(h, v):
    """Indices (i-1, i+1) around the first discrete local minimum, or None."""
    slope = np.diff(v)
    for i in range(1, len(slope)):
        if slope[i - 1] < 0 <= slope[i]:
            return i - 1, i + 1
    return None


def voi_curve(d: float, f: float, g: float, h_grid) -> VoICurve:
    """Sweep the steady-state VoI over signal-noise levels.

    The curve is classified from the closed-form zero-noise curvature.  For
    ``MaxAtZero`` curves with ``d > 1`` the first dip is bracketed on the grid
    and refined by golden-section search.
    """
    h = np.asarray(h_grid, dtype=float)
    if h.ndim != 1 or h.size == 0:
        raise ConfigError("h_grid must be a non-empty 1-d sequence")
    if np.any(h < 0) or np.any(~np.isfinite(h)):
        raise ConfigError("h_grid entries must be finite and non-negative")
    if h.size > 1 and np.any(np.diff(h) <= 0):
        raise ConfigError("h_grid must be strictly increasing")
    s, k, voi, pr = (np.atleast_1d(a) for a in steady_voi(d, f, g, h))
    cls = classify(d, g)
    interior = None
    if cls is Classification.MAX_AT_ZERO and d > 1:
        br = _bracket_minimum(h, voi)
        if br is not None:
            interior = golden_min(lambda x: float(steady_voi(d, f, g, x)[2]), h[br[0]], h[br[1]])
    return VoICurve(float(d), float(f), float(g), h, s, k, voi, pr, cls, interior)
