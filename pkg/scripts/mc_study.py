"""Monte Carlo time-step study: estimate minus analytic value, in standard errors, as dt shrinks.

The never-switch tracks isolate the discretisation bias of the reward sum
(and, for the absorbed OU model, of the absorption test) from the policy.
"""

from __future__ import annotations

import argparse

from switchbench import fixtures as fx
from switchbench.crosscheck import default_starts
from switchbench.mc import NEVER, MCConfig, mc_values, track
from switchbench.smoothfit import q_true, solve, value


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fixture", default="gbm_case1",
                    choices=["gbm_case1", "gbm_case2", "ou_example", "degenerate"])
    ap.add_argument("--dts", type=float, nargs="+", default=[4e-2, 2e-2, 1e-2, 5e-3])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    problem = getattr(fx, args.fixture)()
    sol = solve(problem)
    starts = default_starts(sol)
    tracks = [track(x, i, sol) for x, i in starts] + [track(x, i, NEVER) for x, i in starts]
    exact = [float(value(sol, x, i)) for x, i in starts] + [float(q_true(problem, i)(x)) for x, i in starts]
    labels = [f"opt({x:.3g},{i})" for x, i in starts] + [f"never({x:.3g},{i})" for x, i in starts]
    print("dt       " + " ".join(f"{s:>16s}" for s in labels))
    for dt in args.dts:
        est = mc_values(problem, tracks, MCConfig(n_paths=args.paths, dt=dt, seed=args.seed))
        z = [(e.mean - v) / e.std_error if e.std_error > 0 else 0.0 for e, v in zip(est, exact)]
        print(f"{dt:<8.1e} " + " ".join(f"{v:16.2f}" for v in z))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
