"""Solve the three reference problems and print the constants next to their reference values."""

from __future__ import annotations

import argparse
import time

from switchbench import fixtures as fx
from switchbench.smoothfit import solve

REFERENCE = {
    "gbm_case1": ({"a": 3.8954, "b": 1.9678}, {"beta0": 0.416971, "beta1": 11.3264}, 1e-3),
    "gbm_case2": ({"a": 4.00677, "b_tilde": 0.0143517, "c": 0.709694},
                  {"beta0": 0.450813, "beta_tilde1": 1.06257, "beta_hat1": 5014.6}, 1e-3),
    "ou_example": ({"a": 0.7943, "b": 0.1079}, {"beta0": 2.7057, "beta1": 1.4420}, 2e-3),
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", default=sorted(REFERENCE))
    args = ap.parse_args(argv)
    worst = 0.0
    for name in args.names:
        bounds, coefs, tol = REFERENCE[name]
        t = time.perf_counter()
        sol = solve(getattr(fx, name)())
        elapsed = time.perf_counter() - t
        print(f"{name}: {sol.case}, {elapsed:.2f} s")
        for table, got in ((bounds, sol.boundaries), (coefs, sol.coefficients)):
            for key, ref in table.items():
                rel = abs(got[key] - ref) / abs(ref)
                worst = max(worst, rel / tol)
                flag = "ok" if rel <= tol else "MISS"
                print(f"  {key:12s} {got[key]:<22.12g} ref {ref:<12g} rel {rel:.2e} [{flag}]")
    return 0 if worst <= 1.0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
