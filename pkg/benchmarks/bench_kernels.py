"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--n-mu 200] [--n-sigma 100] [--repeat 3]

Times one Bellman sweep on the default grid and a batch of scalar Riccati
iterations with each available backend, checks that the backends agree, and
prints the best-of-``repeat`` time and the speed-up.
"""
import argparse
import sys
import timeit

import numpy as np

from growvoi import kernels
from growvoi.nonmyopic import (PRICE_HALF_WIDTH, PRICE_SCAN, PRICE_TOL, NonMyopicModel, _golden_iterations,
                               default_grid, price_bracket, quadrature)


def bellman_case(n_mu, n_sigma):
    model = NonMyopicModel(d=1.2, f=1.0, h=1.0, b=1.0, c=0.0, delta=0.9)
    grid = default_grid(model, n_mu, n_sigma)
    V = (grid.mu_grid[:, None] - model.c) ** 2 / (4 * (1 - model.delta)) + 0.0 * grid.sigma_grid
    nodes, weights = quadrature()
    lo, hi = price_bracket(grid.mu_grid, model)
    n_golden = _golden_iterations(4 * PRICE_HALF_WIDTH / PRICE_SCAN, PRICE_TOL)
    args = (V, grid.mu_grid, grid.sigma_grid, model.d, model.f, model.h, model.b, model.c, model.delta,
            nodes, weights, lo, hi, n_golden, PRICE_SCAN)
    return lambda k: k.bellman_sweep(*args)


def riccati_case(n_models):
    rng = np.random.default_rng(0)
    params = np.column_stack([rng.uniform(1.0, 1.5, n_models), rng.uniform(0.5, 2, (n_models, 3))])

    def run(k):
        return [k.riccati_scalar(d, f, g, h, 1.0, 1e-12, 100_000)[0] for d, f, g, h in params]
    return run


def bench(name, case, repeat):
    results, times = {}, {}
    for backend in kernels.available():
        k = kernels.get(backend)
        results[backend] = case(k)
        times[backend] = min(timeit.repeat(lambda: case(k), number=1, repeat=repeat))
    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        a0 = a[0] if isinstance(a, tuple) else a
        b0 = b[0] if isinstance(b, tuple) else b
        diff = float(np.max(np.abs(np.asarray(a0) - np.asarray(b0))))
    else:
        diff = float("nan")
    line = f"{name:<28}" + "".join(f"{b:>10}: {t * 1e3:10.2f} ms" for b, t in sorted(times.items()))
    if len(times) == 2:
        line += f"   speed-up {times['python'] / times['compiled']:6.1f}x   max diff {diff:.1e}"
    print(line)
    return times


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-mu", type=int, default=200)
    ap.add_argument("--n-sigma", type=int, default=100)
    ap.add_argument("--riccati-models", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if "compiled" not in kernels.available():
        print("compiled backend not built; timing the python backend only", file=sys.stderr)
    bench(f"bellman_sweep {args.n_mu}x{args.n_sigma}", bellman_case(args.n_mu, args.n_sigma), args.repeat)
    bench(f"riccati_scalar x{args.riccati_models}", riccati_case(args.riccati_models), args.repeat)


if __name__ == "__main__":
    main()
