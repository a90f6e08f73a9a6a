"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementations in ``_pykernels`` are used.  Both expose
``riccati_scalar`` and ``bellman_sweep`` with identical semantics.
"""
from contextlib import contextmanager

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

OK, MAXITER, SINGULAR = _pykernels.OK, _pykernels.MAXITER, _pykernels.SINGULAR

#: every backend this package knows about, built or not
BACKEND_NAMES = ("compiled", "python")

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels

_active = "compiled" if _ckernels is not None else "python"


def available():
    return sorted(BACKENDS)


def backend_name():
    return _active


def get(name=None):
    if name is None:
        name = _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {available()}") from None


@contextmanager
def use_backend(name):
    """Temporarily switch the active backend."""
    global _active
    get(name)
    prev, _active = _active, name
    try:
        yield get(name)
    finally:
        _active = prev


def riccati_scalar(d, f, g, h, sigma0, tol, max_iter):
    return get().riccati_scalar(d, f, g, h, sigma0, tol, max_iter)


def bellman_sweep(V, mu_grid, sigma_grid, d, f, h, b, c, delta, nodes, weights, p_lo, p_hi, n_golden, n_scan):
    return get().bellman_sweep(V, mu_grid, sigma_grid, d, f, h, b, c, delta,
                               nodes, weights, p_lo, p_hi, n_golden, n_scan)
