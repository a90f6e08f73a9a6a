"""Multi-market linear-Gaussian demand model and its Kalman recursion.

The unknown market potentials evolve as ``theta[t+1] = D theta[t] + F e[t+1]``
and the firm observes ``S[t] = G theta[t] + H gamma[t]`` with standard normal
``e`` and ``gamma``.  The gain used throughout includes the growth matrix,
``K = D S G' (G S G' + H H')^-1``, so that the belief recursion reads
``mu[t+1] = K S[t] + (D - K G) mu[t]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SingularInnovation

#: Condition-number ceiling above which a matrix is treated as singular.
COND_LIMIT = 1e14
#: Relative tolerance for symmetry / PSD checks on covariances.
SYM_TOL = 1e-12


def _as_matrix(x, n: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a * np.eye(n)
    elif a.ndim == 1:
        if a.shape[0] != n:
            raise ConfigError(f"{name}: expected {n} diagonal entries, got {a.shape[0]}")
        a = np.diag(a)
    if a.shape != (n, n):
        raise ConfigError(f"{name}: expected shape ({n}, {n}), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{name}: non-finite entries")
    return a


def _as_vector(x, n: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = np.full(n, float(a))
    if a.shape != (n,):
        raise ConfigError(f"{name}: expected shape ({n},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{name}: non-finite entries")
    return a


def symmetrize(C: np.ndarray) -> np.ndarray:
    return 0.5 * (C + C.T)


def _check_covariance(C: np.ndarray, name: str) -> None:
    scale = max(1.0, float(np.max(np.abs(C))))
    if np.max(np.abs(C - C.T)) > SYM_TOL * scale:
        raise ConfigError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(symmetrize(C)).min() < -SYM_TOL * scale:
        raise ConfigError(f"{name} is not positive semidefinite")


@dataclass(frozen=True)
class StateSpaceModel:
    """Growth, noise-loading and signal matrices of the n-market model.

    Scalars and 1-d arrays are broadcast to ``x * I`` and ``diag(x)``.
    ``H`` may be singular (``H = 0`` is the noiseless-signal case); ``D``,
    ``F`` and ``G`` must be invertible.
    """

    n: int
    D: np.ndarray
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    c: np.ndarray
    mu0: np.ndarray
    Sigma0: np.ndarray
    _Dinv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigError(f"market count must be a positive integer, got {n!r}")
        object.__setattr__(self, "n", int(n))
        for name in ("D", "F", "G", "H", "Sigma0"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), n, name))
        for name in ("c", "mu0"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), n, name))
        for name in ("D", "F", "G"):
            if np.linalg.cond(getattr(self, name)) > COND_LIMIT:
                raise ConfigError(f"{name} must be invertible")
        _check_covariance(self.Sigma0, "Sigma0")
        object.__setattr__(self, "Sigma0", symmetrize(self.Sigma0))
        object.__setattr__(self, "_Dinv", np.linalg.inv(self.D))
        for name in ("D", "F", "G", "H", "Sigma0", "c", "mu0", "_Dinv"):
            getattr(self, name).setflags(write=False)

    @classmethod
    def scalar(cls, d=1.0, f=1.0, g=1.0, h=1.0, c=0.0, mu0=0.0, sigma0=1.0):
        return cls(1, d, f, g, h, c, mu0, sigma0)

    @property
    def is_diagonal(self) -> bool:
        return all(
            np.count_nonzero(M - np.diag(np.diag(M))) == 0
            for M in (self.D, self.F, self.G, self.H)
        )

    @property
    def FF(self) -> np.ndarray:
        return self.F @ self.F.T

    @property
    def HH(self) -> np.ndarray:
        return self.H @ self.H.T

    @property
    def D_inv(self) -> np.ndarray:
        return self._Dinv


@dataclass(frozen=True)
class Belief:
    """Prior mean and covariance of the potentials at the start of period ``t``."""

    t: int
    mu: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        if self.t < 0:
            raise ConfigError("period index must be non-negative")
        mu = np.asarray(self.mu, dtype=float)
        Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        if mu.ndim == 0:
            mu = mu.reshape(1)
        if Sigma.shape != (mu.shape[0], mu.shape[0]):
            raise ConfigError(f"Sigma shape {Sigma.shape} does not match mu {mu.shape}")
        _check_covariance(Sigma, "Sigma")
        Sigma = symmetrize(Sigma)
        mu.setflags(write=False)
        Sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Sigma", Sigma)

    @classmethod
    def initial(cls, model: StateSpaceModel) -> "Belief":
        return cls(0, model.mu0.copy(), model.Sigma0.copy())


@dataclass(frozen=True)
class KalmanStep:
    gain: np.ndarray
    normalized_gain: np.ndarray
    next_belief: Belief


def predict(belief: Belief, model: StateSpaceModel):
    """Propagate a belief one period without observing anything.

    Returns ``(D mu, D Sigma D' + F F')``.
    """
    D = model.D
    return D @ belief.mu, symmetrize(D @ belief.Sigma @ D.T + model.FF)


def innovation_covariance(Sigma: np.ndarray, model: StateSpaceModel) -> np.ndarray:
    G = model.G
    return symmetrize(G @ Sigma @ G.T + model.HH)


def _solve_innovation(Sigma, model, rhs):
    """Solve ``(G S G' + H H') X = rhs`` after a conditioning check."""
    S = innovation_covariance(Sigma, model)
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > COND_LIMIT:
        raise SingularInnovation(
            "innovation covariance G Sigma G' + H H' is numerically singular"
        )
    return np.linalg.solve(S, rhs)


def kalman_gain(Sigma, model: StateSpaceModel) -> np.ndarray:
    """Growth-inclusive gain ``D Sigma G' (G Sigma G' + H H')^-1``.

    Raises
    ------
    SingularInnovation
        If the innovation covariance has condition number above ``COND_LIMIT``.
    """
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    # K' = S^-1 (G Sigma D') since S is symmetric
    return _solve_innovation(Sigma, model, model.G @ Sigma @ model.D.T).T


def riccati_step(Sigma, model: StateSpaceModel, K=None) -> np.ndarray:
    """Next-period prior covariance given the current one.

    Uses the Joseph arrangement ``(D-KG) S (D-KG)' + K H H' K' + F F'``, which
    equals ``D S D' + F F' - K G S D'`` at the optimal gain but stays PSD
    under rounding.
    """
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if K is None:
        K = kalman_gain(Sigma, model)
    A = model.D - K @ model.G
    nxt = A @ Sigma @ A.T + K @ model.HH @ K.T + model.FF
    return symmetrize(nxt)


def update(belief: Belief, signal, model: StateSpaceModel) -> KalmanStep:
    """One filtering step: observe ``signal`` and form next period's prior."""
    K = kalman_gain(belief.Sigma, model)
    S = np.asarray(signal, dtype=float).reshape(model.n)
    mu = K @ S + (model.D - K @ model.G) @ belief.mu
    Sigma = riccati_step(belief.Sigma, model, K)
    return KalmanStep(
        gain=K,
        normalized_gain=model.D_inv @ K,
        next_belief=Belief(belief.t + 1, mu, Sigma),
    )


def unbiased_signal(q, mu, c):
    """Undo the myopic price in observed demand: ``q + (mu + c) / 2``."""
    return np.asarray(q, dtype=float) + (np.asarray(mu, dtype=float) + np.asarray(c, dtype=float)) / 2


def signal_variance(Sigma, model: StateSpaceModel) -> np.ndarray:
    """Variance of ``G^-1 S``: ``Sigma + G^-1 H H' G'^-1``."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    GH = np.linalg.solve(model.G, model.H)
    return symmetrize(Sigma + GH @ GH.T)


def bayesian_weight(Sigma, model: StateSpaceModel) -> np.ndarray:
    """Weight ``Sigma G' (G Sigma G' + H H')^-1 G`` put on the unbiased signal.

    Equal to ``D^-1 K G`` for the growth-inclusive gain ``K``.
    """
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    G = model.G
    # (S^-1 G Sigma)' G = Sigma G' S^-1 G
    return _solve_innovation(Sigma, model, G @ Sigma).T @ G


def covariance_path(model: StateSpaceModel, T: int, Sigma0=None):
    """Deterministic prior covariances and gains for periods ``0..T``.

    Returns ``(Sigmas, gains)`` with shapes ``(T+1, n, n)`` and ``(T, n, n)``;
    ``gains[t]`` maps period-``t`` signals into the period-``t+1`` prior.
    """
    Sigma = model.Sigma0 if Sigma0 is None else np.atleast_2d(np.asarray(Sigma0, dtype=float))
    n = model.n
    Sigmas = np.empty((T + 1, n, n))
    gains = np.empty((T, n, n))
    Sigmas[0] = Sigma
    for t in range(T):
        K = kalman_gain(Sigma, model)
        Sigma = riccati_step(Sigma, model, K)
        gains[t] = K
        Sigmas[t + 1] = Sigma
    return Sigmas, gains
