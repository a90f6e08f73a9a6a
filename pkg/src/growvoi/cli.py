"""Command-line front end.

Usage::

    growvoi SUBCOMMAND [key=value ...] [--config FILE] [--out PATH] [--format csv|json]

Parameters come from the ``[SUBCOMMAND]`` section of an INI-style config file
and are overridden by ``key=value`` arguments.  Grids accept ``start:step:stop``
(inclusive) or comma-separated lists; vector model parameters accept comma
lists (one entry per market, diagonal matrices).

Every output starts with a metadata header: a ``# {json}`` line for CSV, a
``"meta"`` member for JSON.  Exit status is 0 on success, 2 on invalid
configuration and 3 on numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, kernels
from .errors import ConfigError, DomainError, NumericalError
from .filter_core import StateSpaceModel
from .market_sim import SimConfig, simulate, write_csv
from .nonmyopic import (NonMyopicModel, default_grid, euler_term, euler_term_limit, nm_sigma_star,
                        solve_bellman)
from .steady_state import steady_state
from .voi_analysis import VoICurve, growth_threshold, voi_curve

OUTDIR_ENV = "GROWVOI_OUTDIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
FORMATS = ("csv", "json")
DEFAULT_FORMAT = {"region": "json"}


# --------------------------------------------------------------------------
# parameter types: each parses text and renders a canonical text form


def _float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"not finite: {text!r}")
    return v


class Real:
    def parse(self, text):
        return _float(text)

    def render(self, v):
        return repr(float(v))


class Count:
    def __init__(self, minimum=0):
        self.minimum = minimum

    def parse(self, text):
        try:
            v = int(text)
        except ValueError:
            raise ConfigError(f"not an integer: {text!r}") from None
        if v < self.minimum:
            raise ConfigError(f"must be at least {self.minimum}: {text!r}")
        return v

    def render(self, v):
        return str(int(v))


class Vector:
    """One or more comma-separated reals."""

    def parse(self, text):
        parts = [p for p in text.split(",") if p.strip()]
        if not parts:
            raise ConfigError("empty vector")
        return tuple(_float(p) for p in parts)

    def render(self, v):
        return ",".join(repr(float(x)) for x in v)


class Grid:
    """``start:step:stop`` (inclusive) or a comma list."""

    def parse(self, text):
        text = text.strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"range must be start:step:stop, got {text!r}")
            start, step, stop = (_float(p) for p in parts)
            if step <= 0:
                raise ConfigError(f"range step must be positive: {text!r}")
            if stop < start:
                raise ConfigError(f"range stop below start: {text!r}")
            n = int(math.floor((stop - start) / step + 1e-9))
            return ("range", start, step, stop, n + 1)
        vals = Vector().parse(text)
        return ("list",) + vals

    def render(self, v):
        if v[0] == "range":
            return ":".join(repr(float(x)) for x in v[1:4])
        return ",".join(repr(float(x)) for x in v[1:])

    @staticmethod
    def values(v) -> np.ndarray:
        if v[0] == "range":
            _, start, step, _stop, n = v
            return start + step * np.arange(n)
        return np.array(v[1:], dtype=float)


class Choice:
    def __init__(self, *options):
        self.options = options

    def parse(self, text):
        if text not in self.options:
            raise ConfigError(f"expected one of {', '.join(self.options)}, got {text!r}")
        return text

    def render(self, v):
        return v


class Optional_:
    """A value of the wrapped type or ``none``."""

    def __init__(self, inner):
        self.inner = inner

    def parse(self, text):
        return None if text.strip().lower() == "none" else self.inner.parse(text)

    def render(self, v):
        return "none" if v is None else self.inner.render(v)


_MARKET = {
    "d": (Vector(), "1.0"), "f": (Vector(), "1.0"), "g": (Vector(), "1.0"), "h": (Vector(), "1.0"),
    "c": (Vector(), "0.0"), "mu0": (Vector(), "0.0"), "sigma0": (Vector(), "1.0"),
}

SCHEMA = {
    "filter": {**_MARKET, "T": (Count(1), "20")},
    "steady": {**{k: _MARKET[k] for k in "dfgh"}, "tol": (Real(), "1e-12"),
               "method": (Choice("auto", "closed", "iterate"), "auto")},
    "voi-sweep": {"d": (Real(), "1.1"), "f": (Real(), "1.0"), "g": (Real(), "1.0"),
                  "h": (Grid(), "0:0.25:50")},
    "region": {"g": (Real(), "1.0")},
    "simulate": {**_MARKET, "T": (Count(1), "20"), "paths": (Count(1), "10000")},
    "bellman": {"d": (Real(), "1.2"), "f": (Real(), "1.0"), "h": (Real(), "1.0"), "b": (Real(), "1.0"),
                "c": (Real(), "0.0"), "delta": (Real(), "0.9"),
                "n_mu": (Count(2), "200"), "n_sigma": (Count(2), "100"),
                "mu_lo": (Optional_(Real()), "none"), "mu_hi": (Optional_(Real()), "none"),
                "sigma_lo": (Optional_(Real()), "none"), "sigma_hi": (Optional_(Real()), "none"),
                "tol": (Real(), "1e-6"), "max_sweeps": (Count(1), "5000"),
                "backend": (Choice("auto", *kernels.BACKEND_NAMES), "auto")},
    "euler-limit": {"d": (Real(), "1.2"), "f": (Real(), "1.0"), "b": (Real(), "1.0"), "p": (Real(), "1.0"),
                    "h": (Grid(), "10,100,1000,10000")},
}
SUBCOMMANDS = tuple(SCHEMA)
RESERVED = {"seed"}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    params: dict
    seed: int = 0
    out: Optional[str] = None
    format: str = "csv"
    plot: Optional[str] = None

    @classmethod
    def from_strings(cls, subcommand: str, values: dict, seed="0", out=None, format="csv", plot=None):
        """Build from raw text values; unknown keys and bad values raise ConfigError."""
        if subcommand not in SCHEMA:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        if format not in FORMATS:
            raise ConfigError(f"unknown format {format!r}")
        schema = SCHEMA[subcommand]
        unknown = sorted(set(values) - set(schema))
        if unknown:
            raise ConfigError(f"unknown key(s) for {subcommand}: {', '.join(unknown)}")
        params = {}
        for key, (kind, default) in schema.items():
            raw = values.get(key, default)
            try:
                params[key] = kind.parse(str(raw))
            except ConfigError as e:
                raise ConfigError(f"{key}: {e}") from None
        seed_v = Count(0).parse(str(seed))
        if seed_v >= 2**64:
            raise ConfigError("seed must fit in 64 bits")
        if plot is not None and subcommand != "voi-sweep":
            raise ConfigError("--plot is only available for voi-sweep")
        return cls(subcommand, params, seed_v, out, format, plot)

    def echo(self) -> dict:
        """Canonical text form of everything that determines the output.

        Destinations (``out``, ``plot``) are left out so that a run writes the
        same bytes wherever it writes them; ``from_echo(echo())`` reproduces
        the config up to those destinations.
        """
        schema = SCHEMA[self.subcommand]
        return {
            "subcommand": self.subcommand,
            "params": {k: schema[k][0].render(v) for k, v in self.params.items()},
            "seed": str(self.seed),
            "format": self.format,
        }

    @classmethod
    def from_echo(cls, echo: dict, out=None, plot=None) -> "RunConfig":
        return cls.from_strings(echo["subcommand"], echo["params"], echo["seed"], out, echo["format"], plot)


# --------------------------------------------------------------------------
# domain-object construction (validation) and computation


def _market_model(p) -> StateSpaceModel:
    vecs = [p[k] for k in ("d", "f", "g", "h", "c", "mu0", "sigma0")]
    n = max(len(v) for v in vecs)
    for name, v in zip(("d", "f", "g", "h", "c", "mu0", "sigma0"), vecs):
        if len(v) not in (1, n):
            raise ConfigError(f"{name}: expected 1 or {n} entries, got {len(v)}")
    args = [np.full(n, v[0]) if len(v) == 1 else np.array(v) for v in vecs]
    return StateSpaceModel(n, *args)


def _nm_model(p) -> NonMyopicModel:
    return NonMyopicModel(d=p["d"], f=p["f"], h=p["h"], b=p["b"], c=p["c"], delta=p["delta"])


def _prepare(cfg: RunConfig):
    """Check every precondition and return a zero-argument compute closure."""
    p = cfg.params
    sub = cfg.subcommand
    try:
        if sub in ("filter", "simulate"):
            model = _market_model(p)
            if sub == "filter":
                return lambda: _run_filter(model, p["T"])
            sim = SimConfig(model, p["T"], p["paths"], cfg.seed)
            return lambda: _run_simulate(sim)
        if sub == "steady":
            for k in "dfgh":
                if len(p[k]) not in (1, max(len(p[j]) for j in "dfgh")):
                    raise ConfigError(f"{k}: inconsistent number of markets")
            n = max(len(p[k]) for k in "dfgh")
            model = StateSpaceModel(n, *(np.resize(np.array(p[k]), n) for k in "dfgh"),
                                    c=0.0, mu0=0.0, Sigma0=0.0)
            if not p["tol"] > 0:
                raise ConfigError("tol must be positive")
            return lambda: _run_steady(model, p["tol"], p["method"])
        if sub == "voi-sweep":
            h = Grid.values(p["h"])
            if h.size == 0:
                raise ConfigError("h grid is empty")
            if np.any(h < 0):
                raise ConfigError("h grid must be non-negative")
            if h.size > 1 and np.any(np.diff(h) <= 0):
                raise ConfigError("h grid must be strictly increasing")
            if p["g"] == 0:
                raise ConfigError("g must be non-zero")
            return lambda: _run_voi(p["d"], p["f"], p["g"], h)
        if sub == "region":
            if not p["g"] > 0:
                raise ConfigError("g must be positive")
            return lambda: _run_region(p["g"])
        if sub == "bellman":
            model = _nm_model(p)
            if model.b == 0:
                raise ConfigError("b must be positive")
            mu_range = sigma_range = None
            if (p["mu_lo"] is None) != (p["mu_hi"] is None):
                raise ConfigError("give both mu_lo and mu_hi or neither")
            if (p["sigma_lo"] is None) != (p["sigma_hi"] is None):
                raise ConfigError("give both sigma_lo and sigma_hi or neither")
            if p["mu_lo"] is not None:
                mu_range = (p["mu_lo"], p["mu_hi"])
            if p["sigma_lo"] is not None:
                sigma_range = (p["sigma_lo"], p["sigma_hi"])
            grid = default_grid(model, p["n_mu"], p["n_sigma"], mu_range, sigma_range)
            if not p["tol"] > 0:
                raise ConfigError("tol must be positive")
            backend = None if p["backend"] == "auto" else p["backend"]
            if backend is not None and backend not in kernels.available():
                raise ConfigError(f"backend {backend!r} is not available")
            return lambda: _run_bellman(model, grid, p["tol"], p["max_sweeps"], backend)
        if sub == "euler-limit":
            model = NonMyopicModel(d=p["d"], f=p["f"], h=1.0, b=p["b"], c=0.0, delta=0.0)
            h = Grid.values(p["h"])
            if h.size == 0 or np.any(h < 0):
                raise ConfigError("h grid must be non-empty and non-negative")
            return lambda: _run_euler_limit(model, p["p"], h)
    except DomainError as e:
        raise ConfigError(str(e)) from None
    raise ConfigError(f"unknown subcommand {sub!r}")  # pragma: no cover


def _run_filter(model, T):
    from .filter_core import covariance_path
    Sigmas, gains = covariance_path(model, T)
    cols = {"t": list(range(T + 1))}
    sfx = [""] if model.n == 1 else [f"_{i}" for i in range(model.n)]
    for i, s in enumerate(sfx):
        cols["sigma" + s] = Sigmas[:, i, i].tolist()
        cols["gain" + s] = gains[:, i, i].tolist() + [float("nan")]
    return cols, {}


def _run_steady(model, tol, method):
    ss = steady_state(model, tol=tol, method=method)
    K, S = ss.K_star, ss.Sigma_star
    voi = np.diag(K @ S @ K.T)
    pr = np.diag(K @ S)
    cols = {"market": list(range(model.n)), "sigma_star": np.diag(S).tolist(),
            "k_star": np.diag(K).tolist(), "voi": voi.tolist(), "pro_rata": pr.tolist()}
    return cols, {"iterations": ss.iterations, "residual": ss.residual}


def _run_voi(d, f, g, h):
    curve = voi_curve(d, f, g, h)
    cols = {"h": curve.h_grid.tolist(), "sigma_star": curve.sigma_star.tolist(),
            "k_star": curve.k_star.tolist(), "voi": curve.voi.tolist(), "pro_rata": curve.pro_rata.tolist()}
    extra = {"classification": str(curve.classification),
             "interior_min_h": None if curve.interior_min is None else curve.interior_min[0],
             "interior_min_voi": None if curve.interior_min is None else curve.interior_min[1]}
    return cols, extra, curve


def _run_region(g):
    r = growth_threshold(g)
    return {"g": [r.g], "d_lower": [r.d_lower], "d_upper": [r.d_upper]}, {}


def _run_simulate(sim):
    return simulate(sim), {}


def _run_bellman(model, grid, tol, max_sweeps, backend):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vf = solve_bellman(model, grid, tol=tol, max_sweeps=max_sweeps, backend=backend)
    M, S = np.meshgrid(vf.mu_grid, vf.sigma_grid, indexing="ij")
    cols = {"mu": M.ravel().tolist(), "sigma": S.ravel().tolist(),
            "value": vf.values.ravel().tolist(), "policy_price": vf.policy.ravel().tolist()}
    extra = {"delta": model.delta, "quad_order": vf.quad_order, "sweeps": vf.sweeps,
             "residual": vf.sweep_residual, "clamped": vf.clamped,
             "backend": backend or kernels.backend_name(),
             "mu_grid": [float(vf.mu_grid[0]), float(vf.mu_grid[-1]), int(vf.mu_grid.size)],
             "sigma_grid": [float(vf.sigma_grid[0]), float(vf.sigma_grid[-1]), int(vf.sigma_grid.size)]}
    return cols, extra


def _run_euler_limit(model, p, hs):
    from dataclasses import replace
    limit = euler_term_limit(p, model)
    rows = {"h": [], "sigma_star": [], "euler_term": [], "limit": [], "rel_err": []}
    for h in hs:
        m = replace(model, h=float(h))
        s = nm_sigma_star(p, m)
        e = euler_term(p, s, m)
        rows["h"].append(float(h))
        rows["sigma_star"].append(s)
        rows["euler_term"].append(e)
        rows["limit"].append(limit)
        rows["rel_err"].append(abs(e - limit) / abs(limit) if limit != 0 else abs(e))
    return rows, {}


# --------------------------------------------------------------------------
# output


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _render_columns(cols: dict, meta: dict, fmt: str) -> str:
    if fmt == "json":
        data = {k: [_jsonable(x) for x in v] for k, v in cols.items()}
        return json.dumps({"meta": meta, "data": data}, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    keys = list(cols)
    w.writerow(keys)
    for row in zip(*(cols[k] for k in keys)):
        w.writerow([_num(x) for x in row])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def emit_plot_data(curve: VoICurve, path) -> Path:
    """Write ``h voi`` columns behind a commented classification header."""
    if len(curve.h_grid) == 0:
        raise ConfigError("cannot emit plot data for an empty curve")
    _atomic_write(Path(path), plot_text(curve))
    return Path(path)


def plot_text(curve: VoICurve) -> str:
    head = f"# classification={curve.classification}"
    if curve.interior_min is None:
        head += " interior_min=none"
    else:
        head += f" interior_min_h={curve.interior_min[0]!r} interior_min_voi={curve.interior_min[1]!r}"
    lines = [head, "# h voi"]
    lines += [f"{h!r} {v!r}" for h, v in zip(curve.h_grid.tolist(), curve.voi.tolist())]
    return "\n".join(lines) + "\n"


def _resolve(path: Optional[str]) -> Optional[Path]:
    if path is None or path == "-":
        return None
    p = Path(path)
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir and not p.is_absolute():
        p = Path(outdir) / p
    return p


def _atomic_write(path: Path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}", str(path)) from e


def render(cfg: RunConfig):
    """Validate, compute and render; returns ``{path_or_None: text}`` without writing."""
    compute = _prepare(cfg)
    meta = {"tool": "growvoi", "version": __version__, "config": cfg.echo(), "seed": cfg.seed}
    result = compute()
    outputs = {}
    if cfg.subcommand == "simulate":
        res, _ = result
        meta.update(res.meta)
        if cfg.format == "csv":
            text = write_csv(res, header_meta=meta)
        else:
            from .market_sim import result_rows
            header, rows = result_rows(res)
            cols = {k: [r[i] for r in rows] for i, k in enumerate(header)}
            text = _render_columns(cols, meta, "json")
    elif cfg.subcommand == "voi-sweep":
        cols, extra, curve = result
        meta.update(extra)
        text = _render_columns(cols, meta, cfg.format)
        if cfg.plot is not None:
            outputs[_resolve(cfg.plot)] = plot_text(curve)
    else:
        cols, extra = result
        meta.update(extra)
        text = _render_columns(cols, meta, cfg.format)
    outputs = {_resolve(cfg.out): text, **outputs}
    return outputs


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute a validated configuration; returns the process exit status."""
    stdout = sys.stdout if stdout is None else stdout
    outputs = render(cfg)
    for path, text in outputs.items():
        if path is None:
            stdout.write(text)
        else:
            _atomic_write(path, text)
    return EXIT_OK


def _read_config(path: str, subcommand: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case (T, ...)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except configparser.Error as e:
        raise ConfigError(f"malformed config {path}: {e}") from None
    unknown = [s for s in parser.sections() if s not in SCHEMA]
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    return dict(parser[subcommand]) if parser.has_section(subcommand) else dict(parser.defaults())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="growvoi", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("overrides", nargs="*", metavar="key=value")
    ap.add_argument("--config", help="INI file with one [subcommand] section")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=FORMATS, default=None,
                    help="output format (default: json for region, csv otherwise)")
    ap.add_argument("--plot", help="voi-sweep only: also write two-column plot data here")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def parse_args(argv) -> RunConfig:
    ns = build_parser().parse_intermixed_args(argv)
    values = _read_config(ns.config, ns.subcommand) if ns.config else {}
    for item in ns.overrides:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"expected key=value, got {item!r}")
        values[key.strip()] = val.strip()
    seed = values.pop("seed", "0")
    fmt = ns.format or values.pop("format", None) or DEFAULT_FORMAT.get(ns.subcommand, "csv")
    values.pop("format", None)
    return RunConfig.from_strings(ns.subcommand, values, seed, ns.out, fmt, ns.plot)


def main(argv=None) -> int:
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except ConfigError as e:
        print(f"error: ConfigError: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as e:
        print(f"error: ConfigError: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
