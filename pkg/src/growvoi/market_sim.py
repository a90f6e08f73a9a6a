"""Monte Carlo simulation of a myopic multi-market monopolist.

Each period the firm prices every market at ``(mu + c) / 2``, sells
``q = theta - p + gamma``, observes ``S = G theta + H gamma`` and updates its
belief with the growth-inclusive Kalman gain.  Because the gains do not
depend on the data, the covariance path is computed once and all paths of a
block are propagated together.

Random numbers come in blocks of ``BLOCK`` paths.  Block ``k`` draws from
``PCG64(SeedSequence(seed, spawn_key=(k,)))`` and always fills a full block,
so path ``i`` sees the same numbers whatever the total number of paths.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .filter_core import StateSpaceModel, kalman_gain, riccati_step, symmetrize

BLOCK = 1024
RNG_TAG = f"numpy-{np.__version__}-PCG64-SeedSequence-ziggurat-block{BLOCK}"


@dataclass(frozen=True)
class SimConfig:
    model: StateSpaceModel
    T: int
    paths: int
    seed: int

    def __post_init__(self):
        if not isinstance(self.model, StateSpaceModel):
            raise ConfigError("model must be a StateSpaceModel")
        for name in ("T", "paths", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer")
        if self.T < 1:
            raise ConfigError("T must be at least 1")
        if self.paths < 1:
            raise ConfigError("paths must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SimResult:
    """Cross-path moments for periods ``t = 0 .. T-1``.

    Per-market series have shape ``(T, n)``; profit (summed over markets) has
    shape ``(T,)``.  ``innovation_autocorr`` is the pooled lag-1
    autocorrelation of standardized innovations.
    """
    t: np.ndarray
    mean_price: np.ndarray
    var_price: np.ndarray
    mean_profit: np.ndarray
    var_profit: np.ndarray
    mean_belief: np.ndarray
    var_belief: np.ndarray
    mean_belief_err: np.ndarray
    var_belief_err: np.ndarray
    mean_sq_belief_err: np.ndarray
    var_sq_belief_err: np.ndarray
    sigma_pred: np.ndarray
    gains: np.ndarray
    Sigmas: np.ndarray
    innovation_autocorr: float
    paths: int
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def se_profit(self) -> np.ndarray:
        return np.sqrt(self.var_profit / self.paths)


def myopic_price(mu, c):
    """Per-period expected-profit maximizing price ``(mu + c) / 2``."""
    return (np.asarray(mu, dtype=float) + np.asarray(c, dtype=float)) / 2


def realize_demand(theta, p, gamma):
    """Linear demand with unit slope: ``theta - p + gamma``."""
    return np.asarray(theta, dtype=float) - np.asarray(p, dtype=float) + np.asarray(gamma, dtype=float)


def profit_decomposition(mu, c, t: int, model: StateSpaceModel, K, Sigma):
    """Expected-profit split into a no-learning baseline and a learning term.

    Returns ``(baseline, voi_term)`` with ``baseline = (D^t mu - c)^2 / 4``
    elementwise and ``voi_term = diag(K Sigma K') / 4``.
    """
    n = model.n
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (n,))
    c = np.broadcast_to(np.asarray(c, dtype=float), (n,))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if K.shape != (n, n) or Sigma.shape != (n, n):
        raise ConfigError(f"K and Sigma must be {n}x{n}")
    if t < 0:
        raise ConfigError("t must be non-negative")
    drift = np.linalg.matrix_power(model.D, int(t)) @ mu
    baseline = (drift - c) ** 2 / 4
    voi = np.diag(K @ Sigma @ K.T) / 4
    return baseline, voi


def _gain_path(model: StateSpaceModel, T: int):
    """Prior covariances ``(T+1, n, n)`` and gains ``(T, n, n)``.

    When the innovation covariance is exactly zero (no prior uncertainty
    and noiseless signals) the belief is already exact and the gain is set
    to zero instead of raising.
    """
    n = model.n
    Sigmas = np.empty((T + 1, n, n))
    gains = np.empty((T, n, n))
    S = model.Sigma0
    Sigmas[0] = S
    for t in range(T):
        inn = model.G @ S @ model.G.T + model.HH
        K = np.zeros((n, n)) if not np.any(inn) else kalman_gain(S, model)
        S = riccati_step(S, model, K)
        gains[t] = K
        Sigmas[t + 1] = S
    return Sigmas, gains


class _Moments:
    """Chan-style pooled mean / M2 accumulator, merged in block order."""

    def __init__(self):
        self.n = 0
        self.mean = None
        self.m2 = None

    def add(self, x):
        # x: (paths, ...) sample block
        nb = x.shape[0]
        mb = x.mean(axis=0)
        m2b = ((x - mb) ** 2).sum(axis=0)
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, mb, m2b
            return
        tot = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * (nb / tot)
        self.m2 = self.m2 + m2b + delta * delta * (self.n * nb / tot)
        self.n = tot

    @property
    def var(self):
        if self.n < 2:
            return np.zeros_like(self.mean)
        return self.m2 / (self.n - 1)


def _block_draws(seed: int, block: int, T: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))
    return rng.standard_normal((BLOCK, 2 * T + 1, n))


def _simulate_block(z, model, Sigmas, gains, T):
    """Propagate one block of paths; returns per-period arrays and innovations."""
    P, n = z.shape[0], model.n
    L0 = _psd_sqrt(model.Sigma0)
    theta = model.mu0 + z[:, 0, :] @ L0.T
    mu = np.broadcast_to(model.mu0, (P, n)).copy()
    c = model.c
    out = {k: np.empty((T, P, n)) for k in ("price", "belief", "err")}
    profit = np.empty((T, P))
    innov = np.empty((T, P, n))
    for t in range(T):
        gamma = z[:, 1 + 2 * t, :]
        e = z[:, 2 + 2 * t, :]
        p = myopic_price(mu, c)
        q = realize_demand(theta, p, gamma)
        S = theta @ model.G.T + gamma @ model.H.T
        out["price"][t] = p
        out["belief"][t] = mu
        out["err"][t] = mu - theta
        profit[t] = ((p - c) * q).sum(axis=1)
        resid = S - mu @ model.G.T
        innov[t] = resid @ _inv_sqrt(model.G @ Sigmas[t] @ model.G.T + model.HH).T
        K = gains[t]
        mu = S @ K.T + mu @ (model.D - K @ model.G).T
        theta = theta @ model.D.T + e @ model.F.T
    return out, profit, innov


def _psd_sqrt(A):
    w, V = np.linalg.eigh(symmetrize(A))
    return V @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ V.T


def _inv_sqrt(A):
    """Inverse square root on the range of a PSD matrix (zero on its kernel)."""
    w, V = np.linalg.eigh(symmetrize(A))
    inv = np.where(w > 0, 1.0 / np.sqrt(np.where(w > 0, w, 1.0)), 0.0)
    return V @ np.diag(inv) @ V.T


def simulate(config: SimConfig, keep_paths: bool = False):
    """Run the myopic pricing / learning loop over many independent paths.

    Parameters
    ----------
    config : SimConfig
    keep_paths : bool
        Also return the raw per-path arrays (``price``, ``belief``, ``err``
        of shape ``(T, paths, n)`` and ``profit`` of shape ``(T, paths)``).

    Returns
    -------
    SimResult, or ``(SimResult, dict)`` when ``keep_paths`` is set.
    """
    model, T, n = config.model, config.T, config.model.n
    Sigmas, gains = _gain_path(model, T)
    acc = {k: _Moments() for k in ("price", "profit", "belief", "err", "sq")}
    num = den = 0.0
    kept = {k: [] for k in ("price", "belief", "err", "profit")}
    n_blocks = -(-config.paths // BLOCK)
    for b in range(n_blocks):
        take = min(BLOCK, config.paths - b * BLOCK)
        z = _block_draws(config.seed, b, T, n)[:take]
        out, profit, innov = _simulate_block(z, model, Sigmas, gains, T)
        acc["price"].add(out["price"].transpose(1, 0, 2))
        acc["belief"].add(out["belief"].transpose(1, 0, 2))
        acc["err"].add(out["err"].transpose(1, 0, 2))
        acc["sq"].add((out["err"] ** 2).transpose(1, 0, 2))
        acc["profit"].add(profit.T)
        if T > 1:
            num += float(np.sum(innov[1:] * innov[:-1]))
            den += float(np.sum(innov * innov))
        if keep_paths:
            for k in ("price", "belief", "err"):
                kept[k].append(out[k])
            kept["profit"].append(profit)

    meta = {
        "rng": RNG_TAG,
        "seed": int(config.seed),
        "paths": int(config.paths),
        "T": int(T),
        "n": int(n),
    }
    res = SimResult(
        t=np.arange(T),
        mean_price=acc["price"].mean, var_price=acc["price"].var,
        mean_profit=acc["profit"].mean, var_profit=acc["profit"].var,
        mean_belief=acc["belief"].mean, var_belief=acc["belief"].var,
        mean_belief_err=acc["err"].mean, var_belief_err=acc["err"].var,
        mean_sq_belief_err=acc["sq"].mean, var_sq_belief_err=acc["sq"].var,
        sigma_pred=np.array([np.diag(S) for S in Sigmas[:T]]),
        gains=gains, Sigmas=Sigmas,
        innovation_autocorr=num / den if den > 0 else 0.0,
        paths=int(config.paths), seed=int(config.seed), meta=meta,
    )
    if keep_paths:
        paths = {k: np.concatenate(v, axis=1) for k, v in kept.items()}
        return res, paths
    return res


CSV_COLUMNS = ("t", "mean_price", "mean_profit", "se_profit", "mean_sq_belief_err", "sigma_t_predicted")


def result_rows(res: SimResult):
    """One row per period; per-market columns are suffixed ``_i`` when n > 1."""
    n = res.mean_price.shape[1]
    sfx = [""] if n == 1 else [f"_{i}" for i in range(n)]
    header = ["t"]
    for col in ("mean_price",):
        header += [col + s for s in sfx]
    header += ["mean_profit", "se_profit"]
    for col in ("mean_sq_belief_err", "sigma_t_predicted"):
        header += [col + s for s in sfx]
    rows = []
    for t in range(res.t.size):
        row = [int(res.t[t]), *res.mean_price[t], float(res.mean_profit[t]), float(res.se_profit[t]),
               *res.mean_sq_belief_err[t], *res.sigma_pred[t]]
        rows.append([r if isinstance(r, int) else float(r) for r in row])
    return header, rows


def write_csv(res: SimResult, stream: Optional[io.TextIOBase] = None, header_meta: Optional[dict] = None) -> str:
    """Serialize as CSV behind a ``# {json}`` metadata line; returns the text."""
    buf = io.StringIO()
    meta = dict(res.meta if header_meta is None else header_meta)
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    header, rows = result_rows(res)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text
