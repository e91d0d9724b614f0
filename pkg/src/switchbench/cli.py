"""``switchbench <solve|classify|verify|table> --config <path> [--set key=value]... [--out dir]``"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, build_model, build_rewards, load_config
from .crosscheck import CrosscheckConfig, crosscheck, value_window
from .errors import (ConfigError, HypothesisViolated, NoConvergence, NotConverged,
                     SwitchbenchError, ValidationFailure)
from .mc import MCConfig
from .oracle import GridSpec
from .payoff import validate
from .smoothfit import q_true, solve, value
from .transform import classify

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3, 4


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _problem(cfg: RunConfig):
    return validate(build_model(cfg), build_rewards(cfg))


def _validation_report(problem):
    return [{"name": c.name, "passed": c.passed, "mandatory": c.mandatory, "detail": c.detail}
            for c in problem.validation]


def _grid(cfg: RunConfig) -> GridSpec:
    s = cfg.solve
    return GridSpec(n=s.grid_points, tol=s.tol, max_iter=s.max_iter)


def _solve(cfg: RunConfig):
    problem = _problem(cfg)
    cl = classify(problem, n=cfg.solve.scan_points)
    sol = solve(problem, spec=_grid(cfg), classification=cl)
    return problem, cl, sol


def cmd_classify(cfg: RunConfig):
    problem = _problem(cfg)
    cl = classify(problem, n=cfg.solve.scan_points)
    return {"command": "classify", "classification": cl.as_dict()}, EXIT_OK


def cmd_solve(cfg: RunConfig):
    problem, cl, sol = _solve(cfg)
    return {"command": "solve", "classification": cl.as_dict(), "solution": sol.report(),
            "validation": _validation_report(problem)}, EXIT_OK


def cmd_verify(cfg: RunConfig):
    problem, cl, sol = _solve(cfg)
    v = cfg.verify
    cc = CrosscheckConfig(grid=_grid(cfg), mc=MCConfig(n_paths=v.mc_paths, dt=v.mc_dt, seed=v.mc_seed),
                          enable_iteration=v.enable_iteration, enable_mc=v.enable_mc)
    rep = crosscheck(sol, cc)
    code = EXIT_OK if rep.passed else EXIT_VERIFY
    return {"command": "verify", "classification": {"tag": cl.tag}, "solution": sol.report(),
            "crosscheck": rep.as_dict()}, code


def table_rows(cfg: RunConfig, sol):
    o = cfg.output
    lo, hi = value_window(sol)
    lo = o.x_min if o.x_min is not None else lo
    hi = o.x_max if o.x_max is not None else hi
    c = sol.problem.model.interval[0]
    xs = (c + np.geomspace(lo - c, hi - c, o.points)) if math.isfinite(c) and lo > c \
        else np.linspace(lo, hi, o.points)
    rows = []
    for x in xs:
        x = float(x)
        act = ["switch" if any(iv.contains(x) for iv in g) else "continue" for g in (sol.gamma0, sol.gamma1)]
        rows.append([x, float(value(sol, x, 0)), float(value(sol, x, 1)),
                     float(q_true(sol.problem, 0)(x)), float(q_true(sol.problem, 1)(x)), *act])
    return rows


def cmd_table(cfg: RunConfig):
    _, _, sol = _solve(cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "v0", "v1", "q0_0", "q0_1", "regime0_action", "regime1_action"])
    for row in table_rows(cfg, sol):
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue(), EXIT_OK


COMMANDS = {"classify": cmd_classify, "solve": cmd_solve, "verify": cmd_verify, "table": cmd_table}


def run(command: str, config_path, overrides=(), out: str | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    out_dir = Path(out) if out else Path(".")
    try:
        cfg = load_config(config_path, overrides)
        result, code = COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as exc:
        failed = [c.name for c in exc.checks if c.mandatory and not c.passed]
        print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NoConvergence, HypothesisViolated, NotConverged) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SwitchbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if command == "table":
        _write(out_dir / cfg.output.table, result)
        stdout.write(f"wrote {out_dir / cfg.output.table}\n")
    else:
        text = dumps(result)
        _write(out_dir / cfg.output.report, text)
        stdout.write(text)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="switchbench", description="two-regime optimal switching solver")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON config path or bundled name (gbm_case1, ou, ...)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted override, e.g. rewards.H10=5; repeatable")
    ap.add_argument("--out", default=None, help="directory for the report/table (default: cwd)")
    args = ap.parse_args(argv)
    return run(args.command, args.config, args.overrides, args.out)


if __name__ == "__main__":
    sys.exit(main())
