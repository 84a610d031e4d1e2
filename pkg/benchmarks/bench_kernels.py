"""Benchmark: compiled simplex kernels vs the numpy fallback.

Times the raw tableau elimination kernel and full LP solves on
descent-direction-shaped instances (thin two-sided rows, boxed
variables). Both backends follow identical pivot sequences, so the
comparison is pure kernel throughput.

Run:  python benchmarks/bench_kernels.py [--rows 400] [--repeat 3]
"""

import argparse
import time

import numpy as np

from hyperlp import _kernels_py
from hyperlp import simplex

try:
    from hyperlp import _kernels

    HAVE_COMPILED = True
except ImportError:
    _kernels = None
    HAVE_COMPILED = False


def descent_shaped_problem(m, seed):
    """Random instance shaped like a relaxed descent-direction LP."""
    rng = np.random.default_rng(seed)
    n = m + 1
    A = rng.normal(size=(m, n))
    delta = 1e-6 * max(1.0, float(np.abs(A).max()))
    c = rng.normal(size=n) * 0.1
    return simplex.LpProblem(
        c=c,
        A=A,
        row_lb=np.full(m, -delta),
        row_ub=np.full(m, delta),
        var_lb=-np.ones(n),
        var_ub=np.ones(n),
    )


def time_pivots(kernels, m, n_cols, pivots, seed):
    rng = np.random.default_rng(seed)
    T0 = rng.normal(size=(m + 2, n_cols))
    rows = rng.integers(0, m, size=pivots)
    cols = rng.integers(0, n_cols, size=pivots)
    elapsed = 0.0
    # work in short blocks on a fresh copy so entries cannot blow up;
    # the copies stay outside the timed region
    for block in range(0, pivots, 10):
        T = T0.copy()
        pairs = list(zip(rows[block : block + 10], cols[block : block + 10]))
        start = time.perf_counter()
        for r, j in pairs:
            T[r, j] = 2.0
            kernels.pivot_update(T, int(r), int(j))
        elapsed += time.perf_counter() - start
    return elapsed


def time_solve(kernels, prob, repeat):
    best = float("inf")
    sol = None
    for _ in range(repeat):
        start = time.perf_counter()
        sol = simplex.solve(prob, kernels=kernels)
        best = min(best, time.perf_counter() - start)
    return best, sol


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=400, help="LP row count")
    parser.add_argument("--pivots", type=int, default=200, help="raw pivot count")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not HAVE_COMPILED:
        print("compiled kernels not built (pip install -e . first); nothing to compare")
        return 1

    m = args.rows
    n_cols = 2 * m + 40
    t_py = time_pivots(_kernels_py, m, n_cols, args.pivots, seed=1)
    t_cy = time_pivots(_kernels, m, n_cols, args.pivots, seed=1)
    print(f"pivot_update on a {m + 2}x{n_cols} tableau, {args.pivots} pivots:")
    print(f"  numpy    {t_py:8.3f}s")
    print(f"  compiled {t_cy:8.3f}s   ({t_py / t_cy:.2f}x)")

    prob = descent_shaped_problem(m, seed=7)
    t_solve_py, sol_py = time_solve(_kernels_py, prob, args.repeat)
    t_solve_cy, sol_cy = time_solve(_kernels, prob, args.repeat)
    assert sol_py.status == sol_cy.status
    assert sol_py.iterations == sol_cy.iterations
    assert np.array_equal(sol_py.x, sol_cy.x), "backends diverged"
    print(
        f"solve() on a {m}x{m + 1} descent-shaped LP "
        f"({sol_cy.iterations} iterations, status {sol_cy.status}):"
    )
    print(f"  numpy    {t_solve_py:8.3f}s")
    print(f"  compiled {t_solve_cy:8.3f}s   ({t_solve_py / t_solve_cy:.2f}x)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
