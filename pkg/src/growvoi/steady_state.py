"""Long-run prior covariance of the filter.

Plain fixed-point iteration of the covariance recursion is the reference
solver; the scalar closed form (positive root of
``g^2 S^2 - ((d^2-1) h^2 + f^2 g^2) S - f^2 h^2 = 0``) is the fast path and
is applied per market when every model matrix is diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, NoConvergence, SingularInnovation
from .filter_core import StateSpaceModel, kalman_gain, riccati_step, symmetrize

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10**6


@dataclass(frozen=True)
class SteadyState:
    Sigma_star: np.ndarray
    K_star: np.ndarray
    iterations: int
    residual: float


def riccati_fixed_point(model: StateSpaceModel, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER, Sigma_init=None) -> SteadyState:
    """Iterate ``S <- D S D' + F F' - K G S D'`` until the step is below ``tol``.

    The stopping rule is ``max|step| <= tol * max(1, max|S|)``, i.e. absolute
    for covariances of order one and relative beyond that.

    Parameters
    ----------
    model : StateSpaceModel
    tol : float
        Sup-norm step tolerance.
    max_iter : int
        Iteration budget.
    Sigma_init : array_like, optional
        PSD starting covariance; defaults to the zero matrix.

    Raises
    ------
    NoConvergence
        If the budget is exhausted; carries the last residual.
    SingularInnovation
        If the innovation covariance degenerates along the way.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    n = model.n
    S = np.zeros((n, n)) if Sigma_init is None else symmetrize(np.atleast_2d(np.asarray(Sigma_init, dtype=float)))

    if n == 1:
        d, f, g, h = (float(M[0, 0]) for M in (model.D, model.F, model.G, model.H))
        s, iters, resid, status = kernels.riccati_scalar(d, f, g, h, float(S[0, 0]), tol, max_iter)
        if status == kernels.SINGULAR:
            raise SingularInnovation("innovation variance g^2 S + h^2 vanished")
        if status == kernels.MAXITER:
            raise NoConvergence(f"Riccati iteration did not converge in {max_iter} steps "
                                f"(last residual {resid:.3e})", iters, resid)
        Sig = np.array([[s]])
        return SteadyState(Sig, kalman_gain(Sig, model), int(iters), float(resid))

    resid = np.inf
    for it in range(1, max_iter + 1):
        nxt = riccati_step(S, model)
        resid = float(np.max(np.abs(nxt - S)))
        S = nxt
        if resid <= tol * max(1.0, float(np.max(np.abs(S)))):
            return SteadyState(S, kalman_gain(S, model), it, resid)
    raise NoConvergence(f"Riccati iteration did not converge in {max_iter} steps "
                        f"(last residual {resid:.3e})", max_iter, resid)


def sigma_star_closed_form(d, f, g, h):
    """Steady-state prior variance of a single market.

    Works elementwise on arrays.  For ``h = 0`` this is ``f**2``; for
    ``d = 1`` it reduces to ``f**2/2 + (f/(2g)) * sqrt(f**2 g**2 + 4 h**2)``.
    """
    d, f, g, h = (np.asarray(x, dtype=float) for x in (d, f, g, h))
    if np.any(g == 0):
        raise DomainError("signal loading g must be non-zero")
    gg, hh, ff = g * g, h * h, f * f
    grow = (d - 1.0) * (d + 1.0)
    root = np.sqrt(hh * (hh * grow * grow + 2.0 * ff * gg * (d * d + 1.0)) + ff * ff * gg * gg)
    out = (root + hh * grow + ff * gg) / (2.0 * gg)
    return float(out) if out.ndim == 0 else out


def gain_star(d, g, h, sigma_star):
    """Scalar gain ``d S g / (g^2 S + h^2)`` at a given prior variance."""
    d, g, h, s = (np.asarray(x, dtype=float) for x in (d, g, h, sigma_star))
    den = g * g * s + h * h
    if np.any(den == 0):
        raise DomainError("g^2 * sigma + h^2 must be positive")
    out = d * s * g / den
    return float(out) if out.ndim == 0 else out


def steady_state(model: StateSpaceModel, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, method: str = "auto") -> SteadyState:
    """Steady state via the per-market closed form when possible.

    ``method`` is ``"auto"`` (closed form for diagonal models, otherwise
    iteration), ``"closed"`` or ``"iterate"``.
    """
    if method not in ("auto", "closed", "iterate"):
        raise DomainError(f"unknown method {method!r}")
    diag = model.is_diagonal
    if method == "closed" and not diag:
        raise DomainError("closed form requires diagonal D, F, G, H")
    if method == "iterate" or not diag:
        return riccati_fixed_point(model, tol, max_iter)
    s = sigma_star_closed_form(*(np.diag(M) for M in (model.D, model.F, model.G, model.H)))
    Sig = np.diag(np.atleast_1d(s))
    return SteadyState(Sig, kalman_gain(Sig, model), 0, float(np.max(np.abs(riccati_step(Sig, model) - Sig))))
