"""Compare the compiled and numpy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--n 128] [--repeat 5]

Each kernel is run on the same inputs under both backends; the table lists
the best wall time of ``--repeat`` runs and the max relative difference.
"""

import argparse
import time

import numpy as np

from tentflow import PeriodicGrid
from tentflow.kernels import compiled, get_backend
from tentflow.norms import BallFamily


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n, rng):
    grid = PeriodicGrid(2, 2 * np.pi, n)
    balls = BallFamily.default(grid)
    offsets, weights = balls.stencils[-1]
    values = rng.standard_normal((16, grid.size))
    yield "ball_sums", lambda k: k.ball_sums(values, balls.centers, offsets, weights, n)

    m = 1500
    coords = rng.uniform(0, 1, (m, 2))
    f = rng.standard_normal(m)
    w = rng.uniform(0.5, 1, m)
    yield "pair_difference_sum", lambda k: k.pair_difference_sum(f, coords, w, 0.5)

    field = rng.standard_normal(grid.size)
    pts = rng.uniform(-n, 2 * n, (grid.size, 2))
    yield "interp_periodic", lambda k: k.interp_periodic(field, pts, n)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled kernels are not built; nothing to compare")
        return 1
    py, cy = get_backend("python"), get_backend("compiled")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}{'rel diff':>13}")
    for name, run in cases(args.n, rng):
        t_py, a = best_time(lambda: run(py), args.repeat)
        t_cy, b = best_time(lambda: run(cy), args.repeat)
        a, b = np.asarray(a), np.asarray(b)
        diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
        print(f"{name:<22}{1e3 * t_py:>14.2f}{1e3 * t_cy:>16.2f}{t_py / t_cy:>10.2f}{diff:>13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
