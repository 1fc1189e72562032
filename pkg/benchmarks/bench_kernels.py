"""Time the grid-oracle kernel: compiled extension vs numpy fallback.

Usage:
    python benchmarks/bench_kernels.py --players 4 --units 60 --repeat 3
"""

import argparse
import time

import numpy as np

from swfopt import alloc, kernels
from swfopt.swf import Family

FAMILY_ARGS = {
    Family.UTILITARIAN: {},
    Family.ALPHA: {"alpha": 0.5},
    Family.PROPORTIONAL: {},
    Family.MAXIMIN: {},
    Family.GINI: {},
    Family.LEXIMAX: {},
    Family.THRESHOLD: {"delta": 0.2},
}


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--players", type=int, default=4)
    ap.add_argument("--units", type=int, default=60, help="grid steps per request")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    p = rng.uniform(0.2, 1.0, args.players)
    kmax = np.full(args.players, args.units, dtype=np.int64)
    budget_units = int(0.6 * kmax.sum())
    points = alloc.count_grid_points(kmax, budget_units)
    print(f"players={args.players} units={args.units} feasible points={points}")
    if "compiled" not in kernels.BACKENDS:
        print("compiled kernel unavailable; only the numpy fallback can be timed")

    print(f"{'family':<22}{'compiled s':>12}{'python s':>12}{'speedup':>10}")
    for fam, kw in FAMILY_ARGS.items():
        code = kernels.FAMILY_CODES[fam]
        row = {}
        for backend in kernels.BACKENDS:
            t, out = best_time(lambda: kernels.grid_argmax(p, kmax, budget_units, 1.0, code,
                                                           backend=backend, **kw), args.repeat)
            row[backend] = (t, out)
        py_t = row["python"][0]
        if "compiled" in row:
            c_t = row["compiled"][0]
            same = np.array_equal(row["compiled"][1][0], row["python"][1][0])
            print(f"{fam.value:<22}{c_t:>12.3f}{py_t:>12.3f}{py_t / c_t:>9.1f}x"
                  + ("" if same else "  (argmax differs)"))
        else:
            print(f"{fam.value:<22}{'-':>12}{py_t:>12.3f}{'-':>10}")


if __name__ == "__main__":
    main()
