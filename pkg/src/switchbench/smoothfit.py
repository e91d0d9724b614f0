"""Free-boundary (smooth-fit) solutions and the assembled piecewise value functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .diffusion import Boundary
from .errors import HypothesisViolated, NoConvergence, OutOfDomain
from .oracle import GridSpec, GridValue, iterate_value
from .payoff import Jet, SwitchingProblem, boundary_corrected, obstacles
from .transform import Classification, classify


@dataclass(frozen=True)
class Piece:
    """One branch of v(., i) on (lo, hi).

    kind: "psi" -> coef*psi + q_psi(., i); "phi" -> coef*phi + q_phi(., i);
    "switch" -> v(., 1-i) - H(i, 1-i); "q0" -> the no-switch value.
    """

    lo: float
    hi: float
    kind: str
    coef: float = 0.0


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def contains(self, x) -> bool:
        left = x >= self.lo if self.lo_closed else x > self.lo
        right = x <= self.hi if self.hi_closed else x < self.hi
        return bool(left and right)

    def as_list(self):
        return [self.lo, self.hi, self.lo_closed, self.hi_closed]


def intervals_disjoint(a: list, b: list) -> bool:
    for p in a:
        for q in b:
            lo, hi = max(p.lo, q.lo), min(p.hi, q.hi)
            if lo < hi:
                return False
            if lo == hi:
                lo_in = (p.lo_closed if p.lo == lo else True) and (q.lo_closed if q.lo == lo else True)
                hi_in = (p.hi_closed if p.hi == hi else True) and (q.hi_closed if q.hi == hi else True)
                if lo_in and hi_in:
                    return False
    return True


@dataclass(frozen=True)
class Policy:
    gamma0: list
    gamma1: list
    description: str


@dataclass
class SwitchingSolution:
    case: str
    boundaries: dict
    coefficients: dict
    pieces: tuple                  # (pieces for regime 0, pieces for regime 1)
    gamma0: list
    gamma1: list
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    method: str = "closed form"
    problem: SwitchingProblem | None = field(default=None, repr=False)
    classification: Classification | None = field(default=None, repr=False)

    def report(self) -> dict:
        return {
            "case": self.case,
            "boundaries": dict(self.boundaries),
            "coefficients": dict(self.coefficients),
            "gamma0": [iv.as_list() for iv in self.gamma0],
            "gamma1": [iv.as_list() for iv in self.gamma1],
            "residuals": dict(self.residuals),
            "iterations": self.iterations,
            "method": self.method,
        }


# --- q0 conventions --------------------------------------------------------------

def q_psi(problem: SwitchingProblem, i: int) -> Jet:
    """q0 used next to psi: must vanish at an absorbing left end."""
    if problem.model.left is Boundary.ABSORBING:
        return boundary_corrected(problem, i)
    return problem.q0_jet(i)


def q_phi(problem: SwitchingProblem, i: int) -> Jet:
    """q0 used next to phi: must vanish at an absorbing right end."""
    if problem.model.right is Boundary.ABSORBING:
        return boundary_corrected(problem, i)
    return problem.q0_jet(i)


def q_true(problem: SwitchingProblem, i: int) -> Jet:
    return boundary_corrected(problem, i)


# --- evaluation ------------------------------------------------------------------

def _piece_jet(sol: SwitchingSolution, piece: Piece, x: float, i: int, depth: int = 0):
    p = sol.problem
    if piece.kind == "psi":
        b, q = p.pair.psi_jet(x), q_psi(p, i).jet(x)
    elif piece.kind == "phi":
        b, q = p.pair.phi_jet(x), q_phi(p, i).jet(x)
    elif piece.kind == "q0":
        return tuple(float(v) for v in q_true(p, i).jet(x))
    elif piece.kind == "switch":
        v, d1, d2 = value_jet(sol, x, 1 - i, depth + 1)
        return v - p.rewards.cost(i), d1, d2
    else:
        raise ValueError(f"unknown piece kind {piece.kind}")
    return tuple(float(piece.coef * bb + qq) for bb, qq in zip(b, q))


def _find_piece(sol: SwitchingSolution, x: float, i: int) -> Piece:
    hits = [pc for pc in sol.pieces[i] if pc.lo <= x <= pc.hi]
    if not hits:
        raise OutOfDomain(f"x={x} outside the state interval")
    # at a shared endpoint the closed switching piece wins
    for pc in hits:
        if pc.kind == "switch":
            return pc
    return hits[0]


def value_jet(sol: SwitchingSolution, x: float, i: int, depth: int = 0):
    """(v, v', v'') of regime i at x."""
    if depth > 1:
        raise HypothesisViolated("switching regions overlap: both regimes switch at the same state")
    if not sol.problem.model.contains(x):
        raise OutOfDomain(f"x={x} outside {sol.problem.model.interval}")
    x = float(x)
    return _piece_jet(sol, _find_piece(sol, x, i), x, i, depth)


def value(sol: SwitchingSolution, x, i: int):
    """v(x, i) from the piecewise formulas; accepts scalars or arrays."""
    if np.ndim(x) == 0:
        return value_jet(sol, float(x), i)[0]
    return np.array([value_jet(sol, float(v), i)[0] for v in np.ravel(x)]).reshape(np.shape(x))


def policy(sol: SwitchingSolution) -> Policy:
    def fmt(ivs):
        return " U ".join(f"{'[' if iv.lo_closed else '('}{iv.lo:.6g}, {iv.hi:.6g}{']' if iv.hi_closed else ')'}"
                          for iv in ivs) or "empty"
    desc = (f"in regime 0 switch to 1 at the first hitting time of {fmt(sol.gamma0)}; "
            f"in regime 1 switch to 0 at the first hitting time of {fmt(sol.gamma1)}")
    return Policy(list(sol.gamma0), list(sol.gamma1), desc)


# --- Newton ----------------------------------------------------------------------

def _newton(fun, jac, x0, scale, tol=1e-13, max_iter=100, max_halvings=8):
    """Damped Newton on scaled residuals. Returns (x, trace) or raises NoConvergence."""
    x = np.asarray(x0, float)
    r = fun(x) / scale(x)
    trace = [float(np.max(np.abs(r)))]
    for _ in range(max_iter):
        if trace[-1] < tol:
            return x, trace
        J = jac(x) / scale(x)[:, None]
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian: {exc}", trace)
        lam, norm0 = 1.0, float(np.linalg.norm(r))
        for _h in range(max_halvings + 1):
            trial = x + lam * step
            with np.errstate(all="ignore"):
                rt = fun(trial) / scale(trial)
            if np.all(np.isfinite(rt)) and np.linalg.norm(rt) < norm0:
                break
            lam *= 0.5
        else:
            raise NoConvergence("line search failed", trace)
        x, r = trial, rt
        trace.append(float(np.max(np.abs(r))))
        if np.max(np.abs(lam * step)) <= 1e-15 * (1.0 + np.max(np.abs(x))) and trace[-1] < 1e-10:
            return x, trace
    if trace[-1] < 1e-11:
        return x, trace
    raise NoConvergence(f"Newton did not converge (last scaled residual {trace[-1]:.3g})", trace)


def _solve_system(fun, jac, x0, scale):
    try:
        x, trace = _newton(fun, jac, x0, scale)
        return x, len(trace) - 1, "newton"
    except NoConvergence as exc:
        first = exc
    sol = optimize.root(lambda v: fun(v) / scale(v), x0, jac=lambda v: jac(v) / scale(v)[:, None],
                        method="hybr", options={"xtol": 1e-14})
    if sol.success and np.max(np.abs(sol.fun)) < 1e-11:
        return sol.x, int(sol.nfev), "hybr"
    raise NoConvergence(f"{first}; fallback root finder: {sol.message}", first.trace)


def _jets(problem):
    pair = problem.pair
    return (pair.psi_jet, pair.phi_jet,
            (q_psi(problem, 0).jet, q_psi(problem, 1).jet),
            (q_phi(problem, 0).jet, q_phi(problem, 1).jet))


def _fit_pair(bl, ql, cl, br, qr, cr, shift):
    """Residuals (value, derivative) and their partials for
    cl*bl + ql  ==  cr*br + qr + shift, where bl, ql, br, qr are jets at one point."""
    rv = cl * bl[0] + ql[0] - cr * br[0] - qr[0] - shift
    rd = cl * bl[1] + ql[1] - cr * br[1] - qr[1]
    dv_dx = rd
    dd_dx = cl * bl[2] + ql[2] - cr * br[2] - qr[2]
    sv = 1.0 + abs(cl * bl[0]) + abs(ql[0]) + abs(cr * br[0]) + abs(qr[0]) + abs(shift)
    sd = 1.0 + abs(cl * bl[1]) + abs(ql[1]) + abs(cr * br[1]) + abs(qr[1])
    return (rv, rd), (dv_dx, dd_dx), (sv, sd)


def _guess(problem, gv: GridValue | None, spec: GridSpec | None):
    if gv is None:
        gv = iterate_value(problem, spec or GridSpec(n=2000))
    return gv


def _coef_at(problem, gv, x, i, kind):
    """Coefficient of psi/phi that reproduces the oracle value at x in the given convention."""
    v = float(np.interp(x, gv.xgrid, gv.v(i)))
    if kind == "psi":
        return (v - float(q_psi(problem, i)(x))) / float(problem.pair.psi(x))
    return (v - float(q_phi(problem, i)(x))) / float(problem.pair.phi(x))


def _mid(gv, lo, hi):
    k0, k1 = np.searchsorted(gv.xgrid, [lo, hi])
    return float(gv.xgrid[max(0, min((k0 + k1) // 2, len(gv.xgrid) - 1))])


def _check_value_inequalities(sol: SwitchingSolution, xs):
    p = sol.problem
    worst = 0.0
    for x in xs:
        v0, v1 = value(sol, x, 0), value(sol, x, 1)
        q0, q1 = float(q_true(p, 0)(x)), float(q_true(p, 1)(x))
        tol = 1e-9 * (1.0 + abs(v0) + abs(v1))
        gaps = (q0 - v0, q1 - v1, v1 - p.H01 - v0, v0 - p.H10 - v1)
        worst = max(worst, max(gaps) / (1.0 + abs(v0) + abs(v1)))
        if max(gaps) > tol:
            raise HypothesisViolated(
                f"value inequalities fail at x={x:.6g}: v0={v0:.6g}, v1={v1:.6g}, q0=({q0:.6g}, {q1:.6g})")
    return worst


def _eval_grid(problem, bounds):
    c, d = problem.model.interval
    lo, hi = min(bounds), max(bounds)
    if math.isfinite(c) and c == 0.0:
        return np.geomspace(lo / 4.0, hi * 4.0, 400)
    span = max(hi - lo, 1.0)
    xs = np.linspace(lo - span, hi + span, 400)
    return xs[(xs > c) & (xs < d)]


def _c1_residuals(sol, names):
    out = {}
    for name in names:
        x = sol.boundaries[name]
        for i in (0, 1):
            pcs = [pc for pc in sol.pieces[i] if pc.lo == x or pc.hi == x]
            if len(pcs) == 2:
                a = _piece_jet(sol, pcs[0], x, i)
                b = _piece_jet(sol, pcs[1], x, i)
                out[f"{name}_regime{i}_value"] = abs(a[0] - b[0]) / (1.0 + abs(a[0]))
                out[f"{name}_regime{i}_deriv"] = abs(a[1] - b[1]) / (1.0 + abs(a[1]))
    return out


def solve_connected(problem: SwitchingProblem, guess: GridValue | None = None,
                    spec: GridSpec | None = None, classification: Classification | None = None) -> SwitchingSolution:
    """Four-equation smooth fit for Gamma^0 = [a, d) and Gamma^1 = (c, b]."""
    gv = _guess(problem, guess, spec)
    r0, r1 = gv.regions(0), gv.regions(1)
    if not r0 or not r1:
        raise HypothesisViolated("oracle contact sets do not show two switching regions")
    a0, b0 = r0[-1][0], r1[0][1]
    if not b0 < a0:
        raise HypothesisViolated(f"oracle boundaries out of order: b={b0:.6g} >= a={a0:.6g}")
    xm = _mid(gv, b0, a0)
    x0 = np.array([a0, b0, _coef_at(problem, gv, xm, 0, "psi"), _coef_at(problem, gv, xm, 1, "phi")])
    psi, phi, qps, qph = _jets(problem)
    H01, H10 = problem.H01, problem.H10

    def parts(v):
        a, b, B0, B1 = v
        (ra, rda), (ja, jda), (sa, sda) = _fit_pair(psi(a), qps[0](a), B0, phi(a), qph[1](a), B1, -H01)
        (rb, rdb), (jb, jdb), (sb, sdb) = _fit_pair(psi(b), qps[0](b), B0, phi(b), qph[1](b), B1, H10)
        return (ra, rda, rb, rdb), (ja, jda, jb, jdb), (sa, sda, sb, sdb)

    def fun(v):
        return np.array(parts(v)[0], float)

    def jac(v):
        a, b, _, _ = v
        _, (ja, jda, jb, jdb), _ = parts(v)
        pa, fa, pb, fb = psi(a), phi(a), psi(b), phi(b)
        return np.array([
            [ja, 0.0, pa[0], -fa[0]],
            [jda, 0.0, pa[1], -fa[1]],
            [0.0, jb, pb[0], -fb[0]],
            [0.0, jdb, pb[1], -fb[1]],
        ], float)

    def scale(v):
        return np.array(parts(v)[2], float)

    x, iters, method = _solve_system(fun, jac, x0, scale)
    a, b, B0, B1 = (float(t) for t in x)
    c, d = problem.model.interval
    if not (c < b < a < d) or not (B0 > 0 and B1 > 0):
        raise HypothesisViolated(f"smooth-fit root violates b < a or positivity: a={a:.6g}, b={b:.6g}, "
                                 f"beta0={B0:.6g}, beta1={B1:.6g}")
    pieces = ([Piece(c, a, "psi", B0), Piece(a, d, "switch")],
              [Piece(c, b, "switch"), Piece(b, d, "phi", B1)])
    sol = SwitchingSolution("Connected", {"a": a, "b": b}, {"beta0": B0, "beta1": B1}, pieces,
                            [Interval(a, d, True, False)], [Interval(c, b, False, True)],
                            iterations=iters, method=method, problem=problem, classification=classification)
    sol.residuals = {"fit_max": float(np.max(np.abs(fun(x)))), **_c1_residuals(sol, ("a", "b"))}
    sol.residuals["value_inequality"] = _check_value_inequalities(sol, _eval_grid(problem, (a, b)))
    return sol


def solve_disconnected(problem: SwitchingProblem, guess: GridValue | None = None,
                       spec: GridSpec | None = None, classification: Classification | None = None) -> SwitchingSolution:
    """Six-equation smooth fit for Gamma^0 = [a, d) and Gamma^1 = [b~, c]."""
    gv = _guess(problem, guess, spec)
    r0, r1 = gv.regions(0), gv.regions(1)
    if not r0 or len(r1) != 1:
        raise HypothesisViolated("oracle contact sets do not show a bounded regime-1 switching interval")
    a0 = r0[-1][0]
    bt0, c0 = r1[0][0], r1[0][1]
    if not bt0 < c0:
        raise HypothesisViolated("regime-1 switching interval collapses to a point at grid resolution")
    xl = _mid(gv, gv.xgrid[0], bt0)
    xm = _mid(gv, c0, a0)
    x0 = np.array([a0, bt0, c0, _coef_at(problem, gv, xm, 0, "psi"),
                   _coef_at(problem, gv, xl, 1, "psi"), _coef_at(problem, gv, xm, 1, "phi")])
    psi, phi, qps, qph = _jets(problem)
    H01, H10 = problem.H01, problem.H10

    def parts(v):
        a, bt, cc, B0, Bh, Bt = v
        # at a: regime 0 continuation meets regime 1's phi branch minus H01
        A = _fit_pair(psi(a), qps[0](a), B0, phi(a), qph[1](a), Bt, -H01)
        # at b~: regime 1 psi branch meets regime 0's psi branch minus H10
        Bq = _fit_pair(psi(bt), qps[1](bt), Bh, psi(bt), qps[0](bt), B0, -H10)
        # at c: regime 0's psi branch minus H10 meets regime 1's phi branch
        C = _fit_pair(psi(cc), qps[0](cc), B0, phi(cc), qph[1](cc), Bt, H10)
        return A, Bq, C

    def fun(v):
        A, Bq, C = parts(v)
        return np.array([*A[0], *Bq[0], *C[0]], float)

    def jac(v):
        a, bt, cc, B0, Bh, Bt = v
        A, Bq, C = parts(v)
        pa, fa, pb, pc, fc = psi(a), phi(a), psi(bt), psi(cc), phi(cc)
        return np.array([
            [A[1][0], 0, 0, pa[0], 0, -fa[0]],
            [A[1][1], 0, 0, pa[1], 0, -fa[1]],
            [0, Bq[1][0], 0, -pb[0], pb[0], 0],
            [0, Bq[1][1], 0, -pb[1], pb[1], 0],
            [0, 0, C[1][0], pc[0], 0, -fc[0]],
            [0, 0, C[1][1], pc[1], 0, -fc[1]],
        ], float)

    def scale(v):
        A, Bq, C = parts(v)
        return np.array([*A[2], *Bq[2], *C[2]], float)

    x, iters, method = _solve_system(fun, jac, x0, scale)
    a, bt, cc, B0, Bh, Bt = (float(t) for t in x)
    lo, hi = problem.model.interval
    if not (lo < bt < cc < a < hi) or not (B0 > 0 and Bh > 0 and Bt > 0):
        raise HypothesisViolated(f"smooth-fit root violates b~ < c < a or positivity: a={a:.6g}, "
                                 f"b~={bt:.6g}, c={cc:.6g}")
    pieces = ([Piece(lo, a, "psi", B0), Piece(a, hi, "switch")],
              [Piece(lo, bt, "psi", Bh), Piece(bt, cc, "switch"), Piece(cc, hi, "phi", Bt)])
    sol = SwitchingSolution("Disconnected", {"a": a, "b_tilde": bt, "c": cc},
                            {"beta0": B0, "beta_hat1": Bh, "beta_tilde1": Bt}, pieces,
                            [Interval(a, hi, True, False)], [Interval(bt, cc, True, True)],
                            iterations=iters, method=method, problem=problem, classification=classification)
    sol.residuals = {"fit_max": float(np.max(np.abs(fun(x)))), **_c1_residuals(sol, ("a", "b_tilde", "c"))}
    sol.residuals["value_inequality"] = _check_value_inequalities(sol, _eval_grid(problem, (a, bt, cc)))
    return sol


def _no_switch(problem, classification):
    c, d = problem.model.interval
    pieces = ([Piece(c, d, "q0")], [Piece(c, d, "q0")])
    return SwitchingSolution("Degenerate", {}, {}, pieces, [], [], problem=problem,
                             classification=classification)


def _stopping_boundary(problem, i, spec):
    """Contact set of the single stopping problem for h_i, read off a grid majorant."""
    spec = spec or GridSpec(n=4000)
    gv = iterate_value(problem, GridSpec(n=spec.n, x_lo=spec.x_lo, x_hi=spec.x_hi, max_iter=1,
                                         tol=spec.tol), raise_on_failure=False)
    return gv.regions(i)


def solve_half_degenerate(problem: SwitchingProblem, which: int, spec: GridSpec | None = None,
                          classification: Classification | None = None) -> SwitchingSolution:
    """Regime ``which`` never switches; the other regime solves one stopping problem."""
    i = 1 - which
    runs = _stopping_boundary(problem, i, spec)
    c, d = problem.model.interval
    h = obstacles(problem).h0 if i == 0 else obstacles(problem).h1
    pair = problem.pair
    # u_i = beta * psi (i = 0, stop on [a, d)) or beta * phi (i = 1, stop on (c, b])
    if i == 0:
        if len(runs) != 1:
            raise HypothesisViolated("stopping region of regime 0 is not a right half-line")
        x0 = np.array([runs[-1][0], float(h(runs[-1][0])) / float(pair.psi(runs[-1][0]))])
        basis, qb = pair.psi_jet, q_psi(problem, 0)
    else:
        if len(runs) != 1:
            raise HypothesisViolated("stopping region of regime 1 is not a left half-line")
        x0 = np.array([runs[0][1], float(h(runs[0][1])) / float(pair.phi(runs[0][1]))])
        basis, qb = pair.phi_jet, q_phi(problem, 1)
    qt_i, qt_o = q_true(problem, i), q_true(problem, 1 - i)
    H = problem.rewards.cost(i)

    def parts(v):
        x, B = v
        return _fit_pair(basis(x), qb.jet(x), B, (0.0, 0.0, 0.0), qt_o.jet(x), 0.0, -H)

    def fun(v):
        return np.array(parts(v)[0], float)

    def jac(v):
        x, _ = v
        (_, _), (j1, j2), _ = parts(v)
        bx = basis(x)
        return np.array([[j1, bx[0]], [j2, bx[1]]], float)

    def scale(v):
        return np.array(parts(v)[2], float)

    x, iters, method = _solve_system(fun, jac, x0, scale)
    bnd, B = float(x[0]), float(x[1])
    if not (c < bnd < d) or not B > 0:
        raise HypothesisViolated(f"stopping boundary {bnd:.6g} or coefficient {B:.6g} invalid")
    name = "a" if i == 0 else "b"
    if i == 0:
        pi = [Piece(c, bnd, "psi", B), Piece(bnd, d, "switch")]
        gam = ([Interval(bnd, d, True, False)], [])
    else:
        pi = [Piece(c, bnd, "switch"), Piece(bnd, d, "phi", B)]
        gam = ([], [Interval(c, bnd, False, True)])
    other = [Piece(c, d, "q0")]
    pieces = (pi, other) if i == 0 else (other, pi)
    sol = SwitchingSolution("HalfDegenerate", {name: bnd}, {f"beta{i}": B}, pieces, gam[0], gam[1],
                            iterations=iters, method=method, problem=problem, classification=classification)
    sol.residuals = {"fit_max": float(np.max(np.abs(fun(x)))), **_c1_residuals(sol, (name,))}
    sol.residuals["value_inequality"] = _check_value_inequalities(sol, _eval_grid(problem, (bnd,)))
    return sol


def solve_full_switch(problem: SwitchingProblem, which: int,
                      classification: Classification | None = None) -> SwitchingSolution:
    c, d = problem.model.interval
    sw = [Piece(c, d, "switch")]
    stay = [Piece(c, d, "q0")]
    pieces = (sw, stay) if which == 0 else (stay, sw)
    whole = [Interval(c, d, False, False)]
    return SwitchingSolution("FullSwitch", {}, {}, pieces,
                             whole if which == 0 else [], whole if which == 1 else [],
                             problem=problem, classification=classification)


def solve(problem: SwitchingProblem, spec: GridSpec | None = None,
          classification: Classification | None = None) -> SwitchingSolution:
    """Classify the problem and dispatch to the matching solver."""
    cl = classification or classify(problem)
    if cl.tag == "Degenerate":
        return _no_switch(problem, cl)
    if cl.tag == "HalfDegenerate":
        return solve_half_degenerate(problem, cl.which, spec, cl)
    if cl.tag == "FullSwitch":
        return solve_full_switch(problem, cl.which, cl)
    if cl.tag == "Connected":
        return solve_connected(problem, spec=spec, classification=cl)
    if cl.tag == "Disconnected":
        return solve_disconnected(problem, spec=spec, classification=cl)
    raise HypothesisViolated(f"unsupported problem: {cl.reason}")
