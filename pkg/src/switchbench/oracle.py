"""Grid oracle: iterated optimal stopping on u = v - q0, one concave majorant per regime per step."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotConverged
from .majorant import SampledFunction, concave_majorant
from .payoff import SwitchingProblem, boundary_corrected
from .transform import concavity_sets


@dataclass(frozen=True)
class GridSpec:
    n: int = 4000
    x_lo: float | None = None
    x_hi: float | None = None
    tol: float = 1e-9
    max_iter: int = 500
    max_doublings: int = 6
    stable_cells: float = 0.1

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs at least two points")
        if self.tol <= 0 or self.max_iter < 0:
            raise ValueError("tol must be positive and max_iter nonnegative")


@dataclass
class GridValue:
    xgrid: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    q0: tuple            # (q0(x,0), q0(x,1)) on the grid, expected-reward convention
    contact0: np.ndarray
    contact1: np.ndarray
    n_iter: int
    sup_delta: float
    converged: bool = True
    history: list = field(default_factory=list, repr=False)   # sup_delta per iteration
    max_decrease: float = 0.0      # largest pointwise drop u^(n-1) - u^(n) seen; 0 for a monotone run

    @property
    def v0(self):
        return self.u0 + self.q0[0]

    @property
    def v1(self):
        return self.u1 + self.q0[1]

    def v(self, i):
        return self.v0 if i == 0 else self.v1

    def regions(self, i):
        """Maximal runs of contact points as (x_first, x_last, k_first, k_last)."""
        mask = self.contact0 if i == 0 else self.contact1
        runs, k, n = [], 0, len(mask)
        while k < n:
            if mask[k]:
                j = k
                while j + 1 < n and mask[j + 1]:
                    j += 1
                runs.append((float(self.xgrid[k]), float(self.xgrid[j]), k, j))
                k = j + 1
            else:
                k += 1
        return runs


def _default_range(problem: SwitchingProblem, spec: GridSpec):
    c, d = problem.model.interval
    try:
        sets = concavity_sets(problem)
        roots = [r for r in sets.roots0 + sets.roots1]
    except Exception:
        roots = []
    scale = max([abs(r) for r in roots] + [1.0])
    lo = spec.x_lo if spec.x_lo is not None else (c + 1e-4 * scale if math.isfinite(c) else -8.0 * scale)
    hi = spec.x_hi if spec.x_hi is not None else (4.0 * scale if math.isfinite(c) else 8.0 * scale)
    return lo, hi


def _grid(problem, lo, hi, n):
    c, _ = problem.model.interval
    if math.isfinite(c) and lo > c:
        return c + np.geomspace(lo - c, hi - c, n)
    return np.linspace(lo, hi, n)


def _iterate(problem, xs, spec, q_true):
    pair = problem.pair
    psi, phi = pair.psi(xs), pair.phi(xs)
    y = psi / phi                     # F, increasing
    w = (phi / psi)[::-1]             # -G, increasing after reversal
    q0, q1 = q_true
    h0 = q1 - q0 - problem.H01
    h1 = q0 - q1 - problem.H10
    u0 = np.zeros_like(xs)
    u1 = np.zeros_like(xs)
    c0 = np.zeros(len(xs), bool)
    c1 = np.zeros(len(xs), bool)
    history = []
    delta = math.inf
    drop = 0.0
    for it in range(1, spec.max_iter + 1):
        m0 = concave_majorant(SampledFunction(y, (u1 + h0) / phi, (0.0, 0.0)),
                              nonnegative=True, nondecreasing=True)
        m1 = concave_majorant(SampledFunction(w, ((u0 + h1) / psi)[::-1], (0.0, 0.0)),
                              nonnegative=True, nondecreasing=True)
        n0 = m0.vals * phi
        n1 = m1.vals[::-1] * psi
        # contact only counts where switching is strictly worthwhile
        c0 = m0.contact & (u1 + h0 > 0)
        c1 = m1.contact[::-1] & (u0 + h1 > 0)
        delta = float(max(np.max(np.abs(n0 - u0)), np.max(np.abs(n1 - u1))))
        history.append(delta)
        drop = max(drop, float(max(np.max(u0 - n0), np.max(u1 - n1))))
        u0, u1 = n0, n1
        if delta < spec.tol:
            return u0, u1, c0, c1, it, delta, True, history, drop
    return u0, u1, c0, c1, spec.max_iter, delta, spec.max_iter == 0, history, drop


def _cell(xs, x):
    k = min(max(int(np.searchsorted(xs, x)), 1), len(xs) - 1)
    return float(xs[k] - xs[k - 1])


def iterate_value(problem: SwitchingProblem, spec: GridSpec | None = None,
                  raise_on_failure: bool = True) -> GridValue:
    """Run the u-recursion to its fixed point on a log-spaced (or linear) grid.

    The right end of the grid is doubled until the contact-set ends move by
    less than ``spec.stable_cells`` grid cells, or the fundamental solutions
    stop being finite.
    """
    spec = spec or GridSpec()
    q_true = (boundary_corrected(problem, 0), boundary_corrected(problem, 1))
    lo, hi = _default_range(problem, spec)
    fixed_hi = spec.x_hi is not None
    prev = None
    result = None
    for _ in range(spec.max_doublings + 1):
        xs = _grid(problem, lo, hi, spec.n)
        with np.errstate(over="ignore", invalid="ignore"):
            psi, phi = problem.pair.psi(xs), problem.pair.phi(xs)
            qs = (np.asarray(q_true[0](xs), float), np.asarray(q_true[1](xs), float))
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(phi)) and np.all(phi > 0)
                and all(np.all(np.isfinite(q)) for q in qs)):
            if result is None:
                raise NotConverged("fundamental solutions are not finite on the initial grid", None)
            break
        u0, u1, c0, c1, it, delta, ok, hist, drop = _iterate(problem, xs, spec, qs)
        result = GridValue(xs, u0, u1, qs, c0, c1, it, delta, ok, hist, drop)
        if fixed_hi:
            break
        ends = [float(x) for r in (result.regions(0) + result.regions(1)) for x in r[:2]
                if x < xs[-2]]
        if prev is not None and len(prev) == len(ends):
            moved = max((abs(a - b) / _cell(xs, a) for a, b in zip(prev, ends)), default=0.0)
            if moved < spec.stable_cells:
                break
        prev = ends
        hi = lo + 2.0 * (hi - lo) if not math.isfinite(problem.model.interval[0]) else hi * 2.0
    if not result.converged and raise_on_failure:
        raise NotConverged(f"grid iteration did not converge in {spec.max_iter} steps "
                           f"(last change {result.sup_delta:.3g})", result)
    return result


def interp_value(gv: GridValue, x, i: int):
    return np.interp(x, gv.xgrid, gv.v(i))
