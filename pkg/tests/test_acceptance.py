"""Acceptance suite: one group of tests per numbered criterion.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary prints a
single ``CRITERION n: PASS|FAIL`` line per group.  The full-size Monte Carlo
group (criterion 5) is marked slow and takes roughly half an hour on one core.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from switchbench import fixtures as fx
from switchbench.crosscheck import CrosscheckConfig, crosscheck, grid_checks, value_window
from switchbench.majorant import SampledFunction, concave_majorant
from switchbench.mc import NEVER, MCConfig, mc_values, track
from switchbench.oracle import GridSpec, iterate_value
from switchbench.payoff import obstacles
from switchbench.smoothfit import (_piece_jet, intervals_disjoint, solve, solve_connected,
                                   solve_disconnected, value)
from switchbench.specfun import gamma, pcf, pcf_deriv
from switchbench.transform import generator_of, k_functions

FIXTURES = {"case1": fx.gbm_case1, "case2": fx.gbm_case2, "ou": fx.ou_example}


@pytest.fixture(scope="module")
def solutions():
    return {k: solve(make()) for k, make in FIXTURES.items()}


@pytest.fixture(scope="module")
def grids():
    return {k: iterate_value(make(), GridSpec()) for k, make in FIXTURES.items()}


def timed(fn, *args):
    t = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t


# -- 1-3: regressions against the reference constants ----------------------

@pytest.mark.criterion(1)
def test_criterion_1_gbm_case1_regression():
    problem = fx.gbm_case1()
    sol, dt = timed(solve_connected, problem)
    got = (sol.boundaries["a"], sol.boundaries["b"], sol.coefficients["beta0"], sol.coefficients["beta1"])
    for g, want in zip(got, (3.8954, 1.9678, 0.416971, 11.3264)):
        assert g == pytest.approx(want, rel=1e-3)
    assert dt < 5.0


@pytest.mark.criterion(2)
def test_criterion_2_gbm_case2_regression():
    problem = fx.gbm_case2()
    sol, dt = timed(solve_disconnected, problem)
    c, b = sol.coefficients, sol.boundaries
    got = (c["beta0"], c["beta_tilde1"], c["beta_hat1"], b["a"], b["b_tilde"], b["c"])
    for g, want in zip(got, (0.450813, 1.06257, 5014.6, 4.00677, 0.0143517, 0.709694)):
        assert g == pytest.approx(want, rel=1e-3)
    assert dt < 5.0


@pytest.mark.criterion(3)
def test_criterion_3_ou_regression():
    problem = fx.ou_example()
    sol, dt = timed(solve_connected, problem)
    b, c = sol.boundaries, sol.coefficients
    assert b["b"] < b["a"]
    assert sorted(b.values()) == pytest.approx([0.1079, 0.7943], rel=2e-3)
    assert c["beta0"] == pytest.approx(2.7057, rel=2e-3)
    assert c["beta1"] == pytest.approx(1.4420, rel=2e-3)
    assert dt < 30.0


# -- 4: grid oracle ---------------------------------------------------------

@pytest.mark.criterion(4)
@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_criterion_4_oracle_agreement(name, solutions, grids):
    sol, gv = solutions[name], grids[name]
    lo, hi = value_window(sol)
    bs = sorted(sol.boundaries.values())
    assert lo <= bs[0] / 2.0 + 1e-12 and hi >= 2.0 * bs[-1] - 1e-12
    checks = grid_checks(sol, gv, CrosscheckConfig(grid_rel_tol=5e-3, boundary_cells=2.0))
    failed = [(c.name, c.value) for c in checks if not c.passed]
    assert not failed


# -- 5: full-size Monte Carlo -----------------------------------------------

@pytest.mark.slow
@pytest.mark.criterion(5)
@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_criterion_5_monte_carlo_dominance(name, solutions):
    cfg = CrosscheckConfig(mc=MCConfig(n_paths=100_000, dt=1e-3), enable_iteration=False, mc_z=3.0)
    rep = crosscheck(solutions[name], cfg)
    optimal = [c for c in rep.checks if c.name.startswith("mc_optimal")]
    perturbed = [c for c in rep.checks if c.name.startswith("mc_perturbed")]
    assert len(optimal) == 3 and len(perturbed) == 4
    failed = [(c.name, round(c.value, 3), c.detail) for c in rep.checks if not c.passed]
    assert not failed


# -- 6: invariants ----------------------------------------------------------

@pytest.mark.criterion(6)
@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_criterion_6_regions_disjoint(name, solutions):
    sol = solutions[name]
    assert intervals_disjoint(sol.gamma0, sol.gamma1)


@pytest.mark.criterion(6)
@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_criterion_6_c1_at_boundaries(name, solutions):
    sol = solutions[name]
    fit = [v for k, v in sol.residuals.items() if k != "value_inequality"]
    assert max(fit) < 1e-8
    for x in sol.boundaries.values():
        for i in (0, 1):
            pcs = [pc for pc in sol.pieces[i] if x in (pc.lo, pc.hi)]
            if len(pcs) != 2:
                continue
            left, right = (_piece_jet(sol, pc, x, i) for pc in pcs)
            assert abs(left[0] - right[0]) < 1e-8 * (1.0 + abs(left[0]))
            assert abs(left[1] - right[1]) < 1e-8 * (1.0 + abs(left[1]))


@pytest.mark.criterion(6)
@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_criterion_6_iteration_monotone(name, grids):
    gv = grids[name]
    scale = 1.0 + max(np.max(gv.u0), np.max(gv.u1))
    assert gv.converged and gv.max_decrease <= 1e-12 * scale


def _concave(ys, vals, tol=1e-9):
    slopes = np.diff(vals) / np.diff(ys)
    return bool(np.all(np.diff(slopes) <= tol * (1.0 + np.max(np.abs(slopes)))))


@st.composite
def _samples(draw):
    n = draw(st.integers(3, 50))
    gaps = draw(arrays(float, n, elements=st.floats(0.01, 2.0)))
    vals = draw(arrays(float, n, elements=st.floats(-10.0, 10.0)))
    return np.cumsum(gaps), vals


@pytest.mark.criterion(6)
@settings(max_examples=150, deadline=None)
@given(_samples(), arrays(float, 50, elements=st.floats(0.0, 5.0)))
def test_criterion_6_majorant_properties(s, bump):
    ys, vals = s
    m = concave_majorant(SampledFunction(ys, vals)).vals
    # minimality: lowering any node breaks domination or concavity
    scale = 1.0 + np.max(np.abs(vals))
    for k in range(len(ys)):
        low = m.copy()
        low[k] -= 1e-6 * scale
        assert low[k] < vals[k] or not _concave(ys, low)
    again = concave_majorant(SampledFunction(ys, m)).vals
    np.testing.assert_allclose(again, m, rtol=0, atol=1e-12)
    bigger = concave_majorant(SampledFunction(ys, vals + bump[: len(vals)])).vals
    assert np.all(bigger >= m - 1e-12)


SIGN_GRIDS = {
    "case1": np.geomspace(0.05, 50.0, 100),
    "case2": np.geomspace(0.002, 50.0, 100),
    "ou": np.linspace(0.02, 3.0, 100),
}


@pytest.mark.criterion(6)
@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_criterion_6_concavity_sign_agreement(name):
    p = FIXTURES[name]()
    kf, ob, xs = k_functions(p), obstacles(p), SIGN_GRIDS[name]
    g0, g1 = generator_of(p, ob.h0)(xs), generator_of(p, ob.h1)(xs)
    for x, a0, a1 in zip(xs, g0, g1):
        assert np.sign(kf.K0_at_x(x)[2]) == np.sign(a0)
        assert np.sign(kf.K1_at_x(x)[2]) == np.sign(a1)


@pytest.mark.criterion(6)
@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_criterion_6_rescaling_invariance(name, solutions):
    base = solutions[name]
    p = FIXTURES[name]()
    scaled = solve(p.with_pair(p.pair.rescaled(7.0, 1.0)))
    for k, v in base.boundaries.items():
        assert scaled.boundaries[k] == pytest.approx(v, rel=1e-9)
    lo, hi = value_window(base)
    xs = np.linspace(lo, hi, 60)
    for i in (0, 1):
        np.testing.assert_allclose(value(scaled, xs, i), value(base, xs, i), rtol=1e-9)


@pytest.mark.criterion(6)
def test_criterion_6_degenerate_is_no_switch_value():
    p = fx.degenerate()
    sol = solve(p)
    assert sol.case == "Degenerate" and sol.gamma0 == [] and sol.gamma1 == []
    xs = np.geomspace(0.05, 50.0, 80)
    for i in (0, 1):
        np.testing.assert_allclose(value(sol, xs, i), [p.q0(x, i) for x in xs], rtol=1e-12)
    gv = iterate_value(p, GridSpec(n=2000))
    assert not gv.contact0.any() and not gv.contact1.any()
    assert np.all(gv.u0 == 0.0) and np.all(gv.u1 == 0.0)
    starts = ((0.5, 0), (2.0, 1), (8.0, 0))
    est = mc_values(p, [track(x, i, sol) for x, i in starts] + [track(x, i, NEVER) for x, i in starts],
                    MCConfig(n_paths=4000, dt=1e-2, seed=7))
    for (x, i), opt, never in zip(starts, est[:3], est[3:]):
        assert opt.switch_count_stats["max"] == 0
        # identical paths and no switches: the two estimates coincide exactly
        assert opt.mean == never.mean
        assert abs(opt.mean - p.q0(x, i)) <= 3.0 * opt.std_error


# -- 7: special functions ---------------------------------------------------

@pytest.mark.criterion(7)
def test_criterion_7_pcf_at_origin():
    assert abs(pcf(-1.0, 0.0) - math.sqrt(math.pi / 2.0)) < 1e-10


@pytest.mark.criterion(7)
def test_criterion_7_pcf_deriv_central_differences():
    h = 1e-5
    pts = [(nu, z) for nu in np.linspace(-3.5, -0.2, 5) for z in np.linspace(-3.0, 4.0, 10)]
    assert len(pts) == 50
    for nu, z in pts:
        fd = (pcf(nu, z + h) - pcf(nu, z - h)) / (2.0 * h)
        assert pcf_deriv(nu, z) == pytest.approx(fd, rel=1e-6, abs=1e-12)


@pytest.mark.criterion(7)
@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-20.0, max_value=40.0).filter(lambda x: abs(x - round(x)) > 1e-6))
def test_criterion_7_gamma_recurrence(x):
    assert gamma(x + 1.0) == pytest.approx(x * gamma(x), rel=1e-12)
