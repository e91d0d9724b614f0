from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from switchbench.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, EXIT_VERIFY, main, run
from switchbench.config import load_config
from switchbench.errors import ConfigError
from switchbench.fixtures import gbm_case1
from switchbench.smoothfit import solve, value


def call(args, out_dir):
    """Run ``switchbench <command> --config <name> [--set k=v]...`` in-process."""
    stdout = io.StringIO()
    sets = [args[k + 1] for k, a in enumerate(args) if a == "--set"]
    code = run(args[0], args[2], sets, str(out_dir), stdout)
    return code, stdout.getvalue()


def test_solve_bundled_case1(tmp_path):
    code, text = call(["solve", "--config", "gbm_case1"], tmp_path)
    assert code == EXIT_OK
    rep = json.loads(text)
    assert rep["solution"]["boundaries"]["a"] == pytest.approx(3.8954, rel=1e-3)
    assert rep["solution"]["boundaries"]["b"] == pytest.approx(1.9678, rel=1e-3)
    assert rep["classification"]["tag"] == "Connected"
    assert all(c["passed"] for c in rep["validation"])
    assert (tmp_path / "gbm_case1_report.json").read_text() == text


def test_classify_degenerate(tmp_path):
    code, text = call(["classify", "--config", "degenerate"], tmp_path)
    assert code == EXIT_OK
    assert json.loads(text)["classification"]["tag"] == "Degenerate"


def test_main_entry_point(tmp_path, capsys):
    assert main(["classify", "--config", "gbm_case2", "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["classification"]["tag"] == "Disconnected"


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "switchbench.cli", "classify", "--config", "degenerate",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and '"Degenerate"' in res.stdout


def test_override_changes_case(tmp_path):
    code, text = call(["classify", "--config", "gbm_case1", "--set", "rewards.H01=1", "--set", "rewards.H10=5"],
                      tmp_path)
    assert code == EXIT_OK and json.loads(text)["classification"]["tag"] == "Disconnected"


@pytest.mark.parametrize("sets", [
    ["model.bogus=1"], ["rewards.H01=\"abc\""], ["solve.grid_points=-5"], ["model.kind=\"heston\""],
    ["novalue"], ["verify.enable_mc=3"],
])
def test_config_errors_exit_1(tmp_path, sets):
    args = ["solve", "--config", "gbm_case1"]
    for s in sets:
        args += ["--set", s]
    if sets == ["novalue"]:
        assert run("solve", "gbm_case1", ["novalue"], str(tmp_path), io.StringIO()) == EXIT_CONFIG
        return
    code, _ = call(args, tmp_path)
    assert code == EXIT_CONFIG


def test_missing_and_malformed_config(tmp_path, capsys):
    assert run("solve", str(tmp_path / "nope.json"), (), str(tmp_path), io.StringIO()) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": {"kind": "gbm",\n  "alpha": }\n}')
    assert run("solve", str(bad), (), str(tmp_path), io.StringIO()) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        load_config(bad)


def test_validation_failure_exit_2(tmp_path, capsys):
    code, _ = call(["solve", "--config", "gbm_case1", "--set", "rewards.H10=-3"], tmp_path)
    assert code == EXIT_VALIDATION
    assert "cost_sum_positive" in capsys.readouterr().err


def test_solver_failure_exit_3(tmp_path):
    code, _ = call(["solve", "--config", "gbm_case1", "--set", "solve.max_iter=1"], tmp_path)
    assert code == EXIT_SOLVER


def test_verify_failure_exit_4(tmp_path):
    # a two-unit Euler step is far too coarse for the reward integral
    code, text = call(["verify", "--config", "gbm_case1", "--set", "verify.enable_iteration=false",
                       "--set", "verify.mc_dt=2.0", "--set", "verify.mc_paths=2000"], tmp_path)
    assert code == EXIT_VERIFY
    assert json.loads(text)["crosscheck"]["passed"] is False


def test_verify_grid_only_passes(tmp_path):
    code, text = call(["verify", "--config", "gbm_case2", "--set", "verify.enable_mc=false"], tmp_path)
    assert code == EXIT_OK
    checks = json.loads(text)["crosscheck"]["checks"]
    assert checks and all(c["status"] == "pass" for c in checks)


def test_byte_identical_outputs(tmp_path):
    sets = ["--set", "verify.mc_paths=300", "--set", "verify.mc_dt=0.02", "--set", "solve.grid_points=1000"]
    texts = []
    for sub in ("one", "two"):
        d = tmp_path / sub
        assert call(["verify", "--config", "gbm_case1"] + sets, d)[0] == EXIT_OK
        assert call(["table", "--config", "gbm_case1"], d)[0] == EXIT_OK
        texts.append(((d / "gbm_case1_report.json").read_bytes(), (d / "gbm_case1_table.csv").read_bytes()))
    assert texts[0] == texts[1]


def test_table_round_trip(tmp_path):
    code, _ = call(["table", "--config", "gbm_case1", "--set", "output.points=40"], tmp_path)
    assert code == EXIT_OK
    raw = (tmp_path / "gbm_case1_table.csv").read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.reader(io.StringIO(raw.decode())))
    assert rows[0] == ["x", "v0", "v1", "q0_0", "q0_1", "regime0_action", "regime1_action"]
    assert len(rows) == 41
    sol = solve(gbm_case1())
    for r in rows[1:]:
        x = float(r[0])
        assert float(r[1]) == pytest.approx(value(sol, x, 0), rel=1e-12)
        assert float(r[2]) == pytest.approx(value(sol, x, 1), rel=1e-12)
        assert r[5] == ("switch" if x >= sol.boundaries["a"] else "continue")
        assert r[6] == ("switch" if x <= sol.boundaries["b"] else "continue")
    xs = np.array([float(r[0]) for r in rows[1:]])
    assert np.all(np.diff(xs) > 0)


def test_report_numbers_round_trip(tmp_path):
    code, text = call(["solve", "--config", "gbm_case1"], tmp_path)
    rep = json.loads(text)
    sol = solve(gbm_case1())
    for k, v in sol.boundaries.items():
        assert rep["solution"]["boundaries"][k] == pytest.approx(v, rel=1e-12)
    json.loads((tmp_path / "gbm_case1_report.json").read_text())


def test_nonfinite_values_are_strings(tmp_path):
    code, text = call(["solve", "--config", "gbm_case1"], tmp_path)
    rep = json.loads(text)
    assert rep["solution"]["gamma0"][0][1] == "inf"
