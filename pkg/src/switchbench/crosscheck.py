"""Compare an analytic solution with the grid oracle and with Monte Carlo."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mc import MCConfig, mc_values, track
from .oracle import GridSpec, GridValue, iterate_value
from .smoothfit import Interval, SwitchingSolution, value

PERTURBATIONS = (0.75, 0.9, 1.1, 1.25)


@dataclass(frozen=True)
class CrosscheckConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    mc: MCConfig = field(default_factory=MCConfig)
    enable_iteration: bool = True
    enable_mc: bool = True
    grid_rel_tol: float = 5e-3
    boundary_cells: float = 2.0
    mc_z: float = 3.0
    perturbations: tuple = PERTURBATIONS
    starts: tuple | None = None        # ((x0, i0), ...); default derived from the boundaries


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "status": "pass" if self.passed else "fail",
                "value": self.value, "threshold": self.threshold, "detail": self.detail}


@dataclass
class CrosscheckReport:
    checks: list
    grid: GridValue | None = None
    mc: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {"passed": self.passed, "checks": [c.as_dict() for c in self.checks]}


def value_window(sol: SwitchingSolution):
    b = sorted(sol.boundaries.values())
    c, d = sol.problem.model.interval
    if b:
        lo, hi = b[0] / 2.0, 2.0 * b[-1]
    else:
        lo, hi = 0.5, 12.0
    return max(lo, c), min(hi, d)


def default_starts(sol: SwitchingSolution):
    """Three interior states, geometrically spread across the boundary range."""
    lo, hi = value_window(sol)
    lo, hi = 2.0 * lo, hi / 2.0
    if hi <= lo:
        hi = 2.0 * lo
    xs = [lo * (hi / lo) ** (k / 4.0) for k in (1, 2, 3)]
    return ((xs[0], 0), (xs[1], 1), (xs[2], 0))


def perturbed(sol: SwitchingSolution, factor: float):
    """The optimal regions with every finite interior boundary scaled by ``factor``."""
    c, d = sol.problem.model.interval

    def move(x):
        return x if x in (c, d) or not math.isfinite(x) else x * factor

    def scale(ivs):
        return [Interval(move(iv.lo), move(iv.hi), iv.lo_closed, iv.hi_closed) for iv in ivs]
    return scale(sol.gamma0), scale(sol.gamma1)


def grid_checks(sol: SwitchingSolution, gv: GridValue, cfg: CrosscheckConfig):
    lo, hi = value_window(sol)
    xs = gv.xgrid
    mask = (xs >= lo) & (xs <= hi)
    gaps, scale = 0.0, 0.0
    for i in (0, 1):
        an = value(sol, xs[mask], i)
        gaps = max(gaps, float(np.max(np.abs(gv.v(i)[mask] - an))))
        scale = max(scale, float(np.max(np.abs(an))))
    rel = gaps / scale if scale > 0 else gaps
    out = [CheckResult("grid_sup_gap", rel <= cfg.grid_rel_tol, rel, cfg.grid_rel_tol,
                       f"relative sup-norm gap on [{lo:.6g}, {hi:.6g}]")]
    ends = [x for i in (0, 1) for r in gv.regions(i) for x in r[:2]]
    for name, b in sol.boundaries.items():
        k = min(max(int(np.searchsorted(xs, b)), 1), len(xs) - 1)
        cell = float(xs[k] - xs[k - 1])
        dist = min((abs(e - b) for e in ends), default=math.inf) / cell
        out.append(CheckResult(f"grid_boundary_{name}", dist <= cfg.boundary_cells, dist,
                               cfg.boundary_cells, "distance to nearest contact-set end in grid cells"))
    if sol.case == "Degenerate":
        n_contact = int(np.sum(gv.contact0) + np.sum(gv.contact1))
        out.append(CheckResult("grid_no_switching", n_contact == 0, float(n_contact), 0.0,
                               "contact points where no switching is expected"))
    elif sol.case == "FullSwitch":
        which = 0 if sol.gamma0 else 1
        missing = int(np.sum(~(gv.contact0 if which == 0 else gv.contact1)))
        stray = int(np.sum(gv.contact1 if which == 0 else gv.contact0))
        out.append(CheckResult("grid_full_switch", missing + stray == 0, float(missing + stray), 0.0,
                               f"grid points disagreeing with 'regime {which} always switches'"))
    return out


def mc_checks(sol: SwitchingSolution, cfg: CrosscheckConfig):
    problem = sol.problem
    starts = cfg.starts or default_starts(sol)
    tracks = [track(x, i, sol) for x, i in starts]
    xm = starts[len(starts) // 2][0]
    pert = [track(xm, 0, perturbed(sol, f)) for f in cfg.perturbations] if sol.boundaries else []
    est = mc_values(problem, tracks + pert, cfg.mc)
    out, raw = [], {}
    for (x, i), e in zip(starts, est[: len(tracks)]):
        v = float(value(sol, x, i))
        z = abs(e.mean - v) / e.std_error if e.std_error > 0 else (0.0 if e.mean == v else math.inf)
        out.append(CheckResult(f"mc_optimal_x{x:.4g}_i{i}", z <= cfg.mc_z, z, cfg.mc_z,
                               f"estimate {e.mean:.6g} +/- {e.std_error:.3g} vs analytic {v:.6g}"))
        raw[f"optimal_x{x:.4g}_i{i}"] = e
    v = float(value(sol, xm, 0))
    for f, e in zip(cfg.perturbations, est[len(tracks):]):
        excess = (e.mean - v) / e.std_error if e.std_error > 0 else 0.0
        out.append(CheckResult(f"mc_perturbed_{f:g}", excess <= cfg.mc_z, excess, cfg.mc_z,
                               f"estimate {e.mean:.6g} +/- {e.std_error:.3g} vs analytic {v:.6g} at x={xm:.4g}"))
        raw[f"perturbed_{f:g}"] = e
    return out, raw


def crosscheck(sol: SwitchingSolution, config: CrosscheckConfig | None = None) -> CrosscheckReport:
    cfg = config or CrosscheckConfig()
    checks, gv, raw = [], None, {}
    if cfg.enable_iteration:
        gv = iterate_value(sol.problem, cfg.grid)
        checks.extend(grid_checks(sol, gv, cfg))
    if cfg.enable_mc:
        more, raw = mc_checks(sol, cfg)
        checks.extend(more)
    return CrosscheckReport(checks, gv, raw)
