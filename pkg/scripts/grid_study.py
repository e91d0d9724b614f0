"""Grid oracle convergence: sup-norm gap and boundary error against the analytic solution as n grows."""

from __future__ import annotations

import argparse

import numpy as np

from switchbench import fixtures as fx
from switchbench.crosscheck import value_window
from switchbench.oracle import GridSpec, iterate_value
from switchbench.smoothfit import solve, value


def study(name: str, sizes):
    problem = getattr(fx, name)()
    sol = solve(problem)
    lo, hi = value_window(sol)
    rows = []
    for n in sizes:
        gv = iterate_value(problem, GridSpec(n=n))
        xs = gv.xgrid
        mask = (xs >= lo) & (xs <= hi)
        gap = max(float(np.max(np.abs(gv.v(i)[mask] - value(sol, xs[mask], i)))) for i in (0, 1))
        scale = max(float(np.max(np.abs(value(sol, xs[mask], i)))) for i in (0, 1))
        ends = [x for i in (0, 1) for r in gv.regions(i) for x in r[:2]]
        berr = max((min(abs(e - b) for e in ends) for b in sol.boundaries.values()), default=0.0)
        rows.append((n, gv.n_iter, gap / scale, berr, gv.max_decrease))
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fixture", default="gbm_case1",
                    choices=["gbm_case1", "gbm_case2", "ou_example", "degenerate"])
    ap.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000, 2000, 4000, 8000])
    args = ap.parse_args(argv)
    print(f"{'n':>6} {'iters':>6} {'rel_gap':>10} {'bnd_err':>10} {'max_drop':>10}")
    for n, it, gap, berr, drop in study(args.fixture, args.sizes):
        print(f"{n:6d} {it:6d} {gap:10.3e} {berr:10.3e} {drop:10.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
