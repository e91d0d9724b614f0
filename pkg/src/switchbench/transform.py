"""Transformed obstacles K0, K1, their concavity sets, and problem classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .diffusion import GBM
from .errors import OutOfRange, ScanInconclusive
from .payoff import AffineIndicator, Jet, Power, SwitchingProblem, obstacles


@dataclass(frozen=True)
class KFunctions:
    """K0(y) = h0/phi at x = F^{-1}(y) and K1(z) = h1/psi at x = G^{-1}(z).

    The ``*_at_x`` variants skip the inverse and return (K, K', K'') with the
    derivatives taken in transform space.
    """

    problem: SwitchingProblem
    h0: Jet
    h1: Jet

    def K0_at_x(self, x):
        pair = self.problem.pair
        h, dh, d2h = self.h0.jet(x)
        b, db, d2b = pair.phi_jet(x)
        return _transformed(h, dh, d2h, b, db, d2b, pair, x)

    def K1_at_x(self, x):
        pair = self.problem.pair
        h, dh, d2h = self.h1.jet(x)
        b, db, d2b = pair.psi_jet(x)
        return _transformed(h, dh, d2h, b, db, d2b, pair, x)

    def K0(self, y):
        if np.any(np.asarray(y) <= 0):
            raise OutOfRange("K0 is defined for y > 0")
        return self.K0_at_x(self.problem.pair.F_inv(y))[0]

    def K1(self, z):
        if np.any(np.asarray(z) >= 0):
            raise OutOfRange("K1 is defined for z < 0")
        return self.K1_at_x(self.problem.pair.G_inv(z))[0]

    def d2K0(self, y):
        return self.K0_at_x(self.problem.pair.F_inv(y))[2]

    def d2K1(self, z):
        return self.K1_at_x(self.problem.pair.G_inv(z))[2]


def _transformed(h, dh, d2h, b, db, d2b, pair, x):
    """K = h/b with derivatives in the transform coordinate, whose x-derivative is W/b^2."""
    p, dp, d2p = pair.psi_jet(x)
    q, dq, d2q = pair.phi_jet(x)
    W = dp * q - p * dq
    dW = d2p * q - p * d2q
    num = dh * b - h * db
    dnum = d2h * b - h * d2b
    first = num / W
    second = b * b / W * (dnum * W - num * dW) / (W * W)
    return h / b, first, second


def k_functions(problem: SwitchingProblem) -> KFunctions:
    obs = obstacles(problem)
    return KFunctions(problem, obs.h0, obs.h1)


# --- concavity sets -------------------------------------------------------------

def default_window(problem: SwitchingProblem) -> tuple:
    """(lo, hi, kind): log-spaced offsets from a finite left end, linear otherwise."""
    c, d = problem.model.interval
    if math.isfinite(c) and math.isinf(d):
        return c + 1e-6, c + 1e6, "log"
    if math.isfinite(c) and math.isfinite(d):
        return c, d, "lin"
    return -1e3, 1e3, "lin"


def _scan_grid(lo, hi, kind, n, origin=0.0):
    if kind == "log":
        return origin + np.geomspace(lo - origin, hi - origin, n)
    pad = (hi - lo) * 1e-9
    return np.linspace(lo + pad, hi - pad, n)


def _origin(problem):
    c = problem.model.interval[0]
    return c if math.isfinite(c) else 0.0


def generator_of(problem: SwitchingProblem, h: Jet):
    """x -> (A - alpha) h(x), vectorised over numpy arrays."""
    model = problem.model

    def g(x):
        x = np.asarray(x, dtype=float)
        v, d1, d2 = h.jet(x)
        s = model.vol(x)
        return 0.5 * s * s * d2 + model.drift(x) * d1 - model.alpha * v
    return g


@dataclass(frozen=True)
class ConcavitySets:
    """Sign-change roots of (A - alpha)h_i and the sign on each region between them."""

    roots0: tuple
    roots1: tuple
    signs0: tuple
    signs1: tuple
    window: tuple


def sign_changes(g, xs):
    """Roots of g bracketed on the grid xs (refined by brentq) and the sign on each region."""
    vals = np.asarray(g(xs), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ScanInconclusive("non-finite generator values on the scan grid")
    scale = np.max(np.abs(vals)) or 1.0
    s = np.sign(vals)
    # exact zeros: take the sign of the next nonzero neighbour to the right
    for k in range(len(s) - 2, -1, -1):
        if s[k] == 0:
            s[k] = s[k + 1]
    if np.all(s == 0):
        raise ScanInconclusive("generator vanishes identically on the scan grid")
    roots, signs = [], [int(s[0])]
    for k in np.nonzero(s[:-1] != s[1:])[0]:
        a, b = xs[k], xs[k + 1]
        if vals[k] == 0:
            roots.append(float(a))
        else:
            roots.append(float(brentq(g, a, b, xtol=1e-12 * max(1.0, abs(a)), rtol=1e-14, maxiter=500)))
        signs.append(int(s[k + 1]))
    # a near-zero local minimum of |g| without a sign change may hide two roots
    interior = np.abs(vals[1:-1])
    tangent = (interior < 1e-10 * scale) & (s[:-2] == s[2:])
    if np.any(tangent):
        raise ScanInconclusive("generator touches zero without changing sign at scan resolution")
    return tuple(roots), tuple(signs)


def concavity_sets(problem: SwitchingProblem, window=None, n: int = 10_000) -> ConcavitySets:
    """All sign changes of (A - alpha)h0 and (A - alpha)h1 on the scan window.

    K_i is concave exactly where the corresponding generator is negative.
    """
    lo, hi, kind = window if window is not None else default_window(problem)
    xs = _scan_grid(lo, hi, kind, n, _origin(problem))
    obs = obstacles(problem)
    r0, s0 = sign_changes(generator_of(problem, obs.h0), xs)
    r1, s1 = sign_changes(generator_of(problem, obs.h1), xs)
    return ConcavitySets(r0, r1, s0, s1, (lo, hi, kind))


# --- classification ---------------------------------------------------------------

def _tail_limits(problem: SwitchingProblem, h: Jet, i: int):
    """Closed-form limits of h_i at the two ends, or None when not available."""
    fam = problem.rewards.family
    dyn = problem.model.dynamics
    c, d = problem.model.interval
    H = problem.rewards.cost(i)
    sign = 1.0 if i == 0 else -1.0   # h0 = q1 - q0 - H01, h1 = q0 - q1 - H10
    if isinstance(fam, Power) and isinstance(dyn, GBM):
        # q0(x, j) = A_j x^g_j with g_j > 0: both terms vanish at 0
        (k0, g0), (k1, g1) = fam.coef(0), fam.coef(1)
        q = problem.q0_jet
        A0, A1 = float(q(0)(1.0)), float(q(1)(1.0))
        terms = {g0: -sign * A0}
        terms[g1] = terms.get(g1, 0.0) + sign * A1
        lead = [terms[g] for g in sorted(terms, reverse=True) if terms[g] != 0.0]
        right = -H if not lead else math.copysign(math.inf, lead[0])
        return -H, right
    if isinstance(fam, AffineIndicator):
        slope = sign * float(problem.q0_jet(1).d1(1.0 if c == 0 else 0.0))
        def lim(end, direction):
            if math.isfinite(end):
                return float(h(end))
            if slope == 0.0:
                return float(h(0.0))
            return math.copysign(math.inf, slope * direction)
        return lim(c, -1.0), lim(d, 1.0)
    return None


@dataclass(frozen=True)
class Classification:
    tag: str
    which: int | None = None           # HalfDegenerate: regime whose region is empty; FullSwitch: regime switching everywhere
    M0: float | None = None
    M1: float | None = None
    L: float | None = None
    N: float | None = None
    reason: str = ""
    evidence: dict = field(default_factory=dict)

    def as_dict(self):
        out = {"tag": self.tag}
        for k in ("which", "M0", "M1", "L", "N"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        if self.reason:
            out["reason"] = self.reason
        out["evidence"] = self.evidence
        return out


def _extremes(problem, h: Jet, i: int, xs):
    vals = np.asarray(h(xs), dtype=float)
    lims = _tail_limits(problem, h, i)
    sup, inf = float(np.max(vals)), float(np.min(vals))
    if lims is not None:
        sup = max(sup, *lims)
        inf = min(inf, *lims)
    return sup, inf, lims


def classify(problem: SwitchingProblem, window=None, n: int = 10_000) -> Classification:
    sets = concavity_sets(problem, window, n)
    lo, hi, kind = sets.window
    xs = _scan_grid(lo, hi, kind, n, _origin(problem))
    obs = obstacles(problem)
    sup0, inf0, lim0 = _extremes(problem, obs.h0, 0, xs)
    sup1, inf1, lim1 = _extremes(problem, obs.h1, 1, xs)
    certified = lim0 is not None and lim1 is not None
    ev = {
        "roots0": list(sets.roots0), "signs0": list(sets.signs0),
        "roots1": list(sets.roots1), "signs1": list(sets.signs1),
        "sup_h0": sup0, "sup_h1": sup1, "inf_h0": inf0, "inf_h1": inf1,
        "limits_h0": list(lim0) if lim0 else None, "limits_h1": list(lim1) if lim1 else None,
    }
    if not certified and (sup0 <= 0 or sup1 <= 0):
        return Classification("Unsupported", reason="cannot certify h_i <= 0 everywhere from a finite scan", evidence=ev)
    if sup0 <= 0 and sup1 <= 0:
        return Classification("Degenerate", evidence=ev)
    for i, (inf, sets_i) in enumerate(((inf0, sets.signs0), (inf1, sets.signs1))):
        if inf >= 0 and sets_i == (-1,):
            return Classification("FullSwitch", which=i, evidence=ev)
    if sup1 <= 0:
        return Classification("HalfDegenerate", which=1, evidence=ev)
    if sup0 <= 0:
        return Classification("HalfDegenerate", which=0, evidence=ev)
    pair = problem.pair
    if not (len(sets.roots0) == 1 and sets.signs0 == (1, -1)):
        return Classification("Unsupported", reason="concavity set of K0 is not a right half-line", evidence=ev)
    if lim0 is not None and not lim0[1] > 0:
        return Classification("Unsupported", reason="h0 does not stay positive at the right end", evidence=ev)
    M0 = float(pair.F(sets.roots0[0]))
    if len(sets.roots1) == 1 and sets.signs1 == (-1, 1):
        return Classification("Connected", M0=M0, M1=float(-pair.G(sets.roots1[0])), evidence=ev)
    if len(sets.roots1) == 2 and sets.signs1 == (1, -1, 1):
        return Classification("Disconnected", M0=M0, L=float(-pair.G(sets.roots1[0])),
                              N=float(-pair.G(sets.roots1[1])), evidence=ev)
    return Classification("Unsupported", reason="concavity set of K1 is neither a left half-line nor a bounded interval", evidence=ev)
