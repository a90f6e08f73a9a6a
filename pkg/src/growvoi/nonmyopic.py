"""Single-market pricing with multiplicative demand noise.

Demand is ``q = theta - b*beta*p + h*gamma`` with ``beta ~ N(1, 1)``, so the
price itself scales the signal noise and a forward-looking firm can trade
current profit against learning.  The belief state is ``(mu, Sigma)``; the
Bellman equation is solved by value iteration on a rectangular grid, with
Gauss-Hermite quadrature over the standardized innovation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from . import kernels
from ._pykernels import interp2
from .errors import ConfigError, DomainError, GridEscape, GridEscapeWarning, NoConvergence
from .steady_state import sigma_star_closed_form

QUAD_ORDER = 9
PRICE_HALF_WIDTH = 3.0
PRICE_TOL = 1e-6
#: cells of the coarse price scan that precedes golden-section refinement
PRICE_SCAN = 24


@dataclass(frozen=True)
class NonMyopicModel:
    d: float = 1.2
    f: float = 1.0
    h: float = 1.0
    b: float = 1.0
    c: float = 0.0
    delta: float = 0.9

    def __post_init__(self):
        for name in ("d", "f", "h", "b", "c", "delta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigError(f"{name} must be finite")
            object.__setattr__(self, name, float(v))
        if not 0.0 <= self.delta < 1.0:
            raise ConfigError("discount factor must lie in [0, 1)")
        if self.d < 1.0:
            raise ConfigError("growth d must be at least 1")
        if self.f < 0 or self.h < 0 or self.b < 0:
            raise ConfigError("f, h and b must be non-negative")


def nm_signal_variance(Sigma: float, p: float, model: NonMyopicModel) -> float:
    """Prior-predictive variance of the next signal, ``Sigma + b^2 p^2 + h^2``."""
    return Sigma + model.b ** 2 * p * p + model.h ** 2


def nm_gain(Sigma: float, p: float, model: NonMyopicModel) -> float:
    """Growth-free gain ``Sigma / (Sigma + b^2 p^2 + h^2)``."""
    den = nm_signal_variance(Sigma, p, model)
    if den == 0:
        raise DomainError("signal variance is zero (Sigma = h = b*p = 0)")
    return Sigma / den


def nm_update(mu: float, Sigma: float, signal: float, p: float, model: NonMyopicModel):
    """Posterior-then-propagate step; returns ``(mu_next, Sigma_next)``."""
    K = nm_gain(Sigma, p, model)
    d = model.d
    return d * (K * signal + (1 - K) * mu), d * d * (1 - K) * Sigma + model.f ** 2


def myopic_foc_price(mu, model: NonMyopicModel):
    """Root of ``mu + b c - 2 b p = 0``."""
    if model.b == 0:
        raise DomainError("myopic price undefined for b = 0")
    return (mu + model.b * model.c) / (2 * model.b)


def expected_profit(p, mu, model: NonMyopicModel):
    """One-period expected profit ``(p - c)(mu - b p)``."""
    return (p - model.c) * (mu - model.b * p)


def nm_sigma_star(p: float, model: NonMyopicModel) -> float:
    """Steady-state prior variance when the price is held at ``p``."""
    eff = math.sqrt(model.h ** 2 + model.b ** 2 * p * p)
    return sigma_star_closed_form(model.d, model.f, 1.0, eff)


def nm_sigma_fixed_point(p: float, model: NonMyopicModel, tol: float = 1e-13,
                         max_iter: int = 10**6, Sigma0: float = 0.0) -> float:
    """Iterate the variance recursion at a fixed price (reference for ``nm_sigma_star``)."""
    s = Sigma0
    for _ in range(max_iter):
        nxt = nm_update(0.0, s, 0.0, p, model)[1]
        if abs(nxt - s) <= tol * max(1.0, nxt):
            return nxt
        s = nxt
    raise NoConvergence(f"variance recursion did not converge in {max_iter} steps")


def euler_term(p: float, Sigma: float, model: NonMyopicModel) -> float:
    """Marginal-information weight ``-2 b^2 p Sigma / (Sigma + 2 b^2 p^2 + 2 h^2)``."""
    b2 = model.b ** 2
    den = Sigma + 2 * b2 * p * p + 2 * model.h ** 2
    if den == 0:
        raise DomainError("euler_term denominator is zero")
    return -2 * b2 * p * Sigma / den


def euler_term_limit(p: float, model: NonMyopicModel) -> float:
    """Large-``h`` limit of ``euler_term`` at the steady-state variance."""
    d2 = model.d ** 2
    return -2 * model.b ** 2 * p * (d2 - 1) / (d2 + 1)


# -- dynamic programming ----------------------------------------------------

def quadrature(order: int = QUAD_ORDER):
    """Nodes and weights for expectations over a standard normal."""
    x, w = hermegauss(order)
    return x, w / math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class GridSpec:
    mu_grid: np.ndarray
    sigma_grid: np.ndarray

    def __post_init__(self):
        for name in ("mu_grid", "sigma_grid"):
            a = np.ascontiguousarray(getattr(self, name), dtype=float)
            if a.ndim != 1 or a.size == 0:
                raise ConfigError(f"{name} must be a non-empty 1-d array")
            if a.size > 1 and np.any(np.diff(a) <= 0):
                raise ConfigError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, a)
        if self.sigma_grid[0] < 0:
            raise ConfigError("sigma_grid must be non-negative")


def default_grid(model: NonMyopicModel, n_mu: int = 200, n_sigma: int = 100,
                 mu_range: Optional[tuple] = None, sigma_range: Optional[tuple] = None,
                 mu_span: float = 10.0) -> GridSpec:
    """Linear mu-grid and geometric Sigma-grid.

    Default mu range: ``[c - 2 r, c + mu_span * d * r]`` with
    ``r = sqrt(S*(p0))`` and ``p0`` the top of the price bracket at ``mu = c``.
    Default Sigma range: ``[f^2 / 2, 4 S*(p_max)]`` with ``p_max`` the top of
    the price bracket at the upper mu node.
    """
    if n_mu < 2 or n_sigma < 2:
        raise ConfigError("grids need at least two nodes")
    if model.b == 0:
        raise ConfigError("default grid needs b > 0")
    if mu_range is None:
        r = math.sqrt(nm_sigma_star(myopic_foc_price(model.c, model) + PRICE_HALF_WIDTH, model))
        mu_range = (model.c - 2.0 * r, model.c + mu_span * model.d * r)
    if sigma_range is None:
        if model.f == 0:
            raise ConfigError("an explicit sigma_range is required when f = 0")
        p_max = myopic_foc_price(mu_range[1], model) + PRICE_HALF_WIDTH
        sigma_range = (0.5 * model.f ** 2, 4.0 * nm_sigma_star(p_max, model))
    lo, hi = sigma_range
    if not 0 < lo < hi:
        raise ConfigError("sigma_range must satisfy 0 < lo < hi")
    if not mu_range[0] < mu_range[1]:
        raise ConfigError("mu_range must be increasing")
    return GridSpec(np.linspace(mu_range[0], mu_range[1], n_mu), np.geomspace(lo, hi, n_sigma))


@dataclass(frozen=True)
class ValueFunctionGrid:
    mu_grid: np.ndarray
    sigma_grid: np.ndarray
    values: np.ndarray
    policy: np.ndarray
    sweep_residual: float
    sweeps: int = 0
    clamped: int = 0
    quad_order: int = QUAD_ORDER
    residual_history: tuple = field(default=(), repr=False)

    def value_at(self, mu, Sigma):
        return interp2(self.values, self.mu_grid, self.sigma_grid, mu, Sigma)[0]

    def interior_mask(self, margin: float = 0.1) -> np.ndarray:
        """Nodes at least ``margin`` of each axis (in node count) from the edges."""
        n_mu, n_s = self.values.shape
        km = max(1, int(round(margin * n_mu)))
        ks = max(1, int(round(margin * n_s))) if n_s > 2 else 0
        m = np.zeros((n_mu, n_s), dtype=bool)
        m[km:n_mu - km, ks:n_s - ks if ks else n_s] = True
        return m


def _golden_iterations(width: float, tol: float) -> int:
    invphi = (math.sqrt(5) - 1) / 2
    return max(1, int(math.ceil(math.log(tol / width) / math.log(invphi))))


def price_bracket(mu_grid, model: NonMyopicModel, half_width: float = PRICE_HALF_WIDTH):
    p0 = myopic_foc_price(np.asarray(mu_grid), model)
    return p0 - half_width, p0 + half_width


def solve_bellman(model: NonMyopicModel, grid: GridSpec, tol: float = 1e-8,
                  max_sweeps: int = 5000, quad_order: int = QUAD_ORDER,
                  price_tol: float = PRICE_TOL, V_init=None, backend: Optional[str] = None,
                  warn: bool = True) -> ValueFunctionGrid:
    """Value iteration for ``V(mu, S) = max_p E[profit + delta V(mu', S')]``.

    Each sweep is a synchronous (Jacobi) update: every node reads the previous
    table.  Next states falling outside the grid are clamped onto it and
    counted; a ``GridEscapeWarning`` reports the count of the final sweep.

    Raises
    ------
    NoConvergence
        If ``max_sweeps`` sweeps do not bring the sup-norm change below ``tol``.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    if model.b == 0:
        raise DomainError("b must be positive for the price search bracket")
    nodes, weights = quadrature(quad_order)
    mu_grid, sigma_grid = grid.mu_grid, grid.sigma_grid
    p_lo, p_hi = price_bracket(mu_grid, model)
    # each refinement bracket spans two scan cells
    n_golden = _golden_iterations(4 * PRICE_HALF_WIDTH / PRICE_SCAN, price_tol)
    kern = kernels.get(backend)
    V = np.zeros((mu_grid.size, sigma_grid.size)) if V_init is None else np.array(V_init, dtype=float)
    history = []
    for sweep in range(1, max_sweeps + 1):
        Vn, P, clamped = kern.bellman_sweep(V, mu_grid, sigma_grid, model.d, model.f, model.h,
                                            model.b, model.c, model.delta, nodes, weights,
                                            p_lo, p_hi, n_golden, PRICE_SCAN)
        resid = float(np.max(np.abs(Vn - V)))
        history.append(resid)
        V = Vn
        if resid <= tol:
            break
    else:
        raise NoConvergence(f"value iteration did not converge in {max_sweeps} sweeps "
                            f"(last change {resid:.3e})", max_sweeps, resid)
    if clamped and warn:
        warnings.warn(f"{clamped} next-state evaluations clamped onto the grid", GridEscapeWarning,
                      stacklevel=2)
    return ValueFunctionGrid(mu_grid, sigma_grid, V, P, resid, sweep, clamped, quad_order,
                             tuple(history))


def _sigma_step(vf: ValueFunctionGrid, Sigma: float) -> float:
    g = vf.sigma_grid
    j = int(np.clip(np.searchsorted(g, Sigma, side="right") - 1, 0, g.size - 2))
    return float(g[j + 1] - g[j])


def _dV_dSigma(vf: ValueFunctionGrid, mu, Sigma, step):
    mu = np.asarray(mu, dtype=float)
    lo, hi = Sigma - step, Sigma + step
    if (lo < vf.sigma_grid[0] or hi > vf.sigma_grid[-1]
            or np.any(mu < vf.mu_grid[0]) or np.any(mu > vf.mu_grid[-1])):
        raise GridEscape("finite-difference stencil leaves the value-function grid")
    return (vf.value_at(mu, hi) - vf.value_at(mu, lo)) / (2 * step)


def euler_residual(vf: ValueFunctionGrid, mu: float, Sigma: float, p: float,
                   model: NonMyopicModel) -> float:
    """Left side of the simplified Euler condition at ``(mu, Sigma, p)``.

    ``(mu + b c - 2 b p) + euler_term(p, Sigma) * (V_S(mu, Sigma) -
    delta d^2 E[V_S(mu', Sigma')])`` with Sigma-derivatives from centred
    differences of the interpolated value function and the expectation over
    the standardized innovation by Gauss-Hermite quadrature.
    """
    foc = mu + model.b * model.c - 2 * model.b * p
    if model.delta == 0:
        return float(foc)
    nodes, weights = quadrature(vf.quad_order)
    K = nm_gain(Sigma, p, model)
    spread = K * math.sqrt(nm_signal_variance(Sigma, p, model))
    mu_next = model.d * (mu + spread * nodes)
    sig_next = model.d ** 2 * (1 - K) * Sigma + model.f ** 2
    here = float(_dV_dSigma(vf, mu, Sigma, _sigma_step(vf, Sigma)))
    ahead = float(_dV_dSigma(vf, mu_next, sig_next, _sigma_step(vf, sig_next)) @ weights)
    return float(foc + euler_term(p, Sigma, model) * (here - model.delta * model.d ** 2 * ahead))


def geometric_value(mu: float, model: NonMyopicModel, horizon: Optional[int] = None) -> float:
    """Discounted myopic profits ``sum_t delta^t (d^t mu - c)^2 / 4`` for ``b = 1``.

    With ``horizon=None`` the infinite sum is returned in closed form (needs
    ``delta d^2 < 1``).
    """
    d, c, dl = model.d, model.c, model.delta
    if horizon is None:
        if dl * d * d >= 1:
            raise DomainError("closed form needs delta * d^2 < 1")
        return (mu * mu / (1 - dl * d * d) - 2 * c * mu / (1 - dl * d) + c * c / (1 - dl)) / 4
    t = np.arange(horizon)
    return float(np.sum(dl ** t * (d ** t * mu - c) ** 2) / 4)
