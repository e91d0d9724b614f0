"""Uncontrolled diffusion, its fundamental solutions and the F/G transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Union

import numpy as np

from . import specfun
from .errors import OutOfDomain, OutOfRange, UnsupportedModel

ArrayLike = Union[float, np.ndarray]


class Boundary(Enum):
    NATURAL = "natural"
    ABSORBING = "absorbing"


@dataclass(frozen=True)
class GBM:
    """dX = m X dt + beta X dW."""

    m: float
    beta: float

    def drift(self, x):
        return self.m * x

    def vol(self, x):
        return self.beta * x


@dataclass(frozen=True)
class OU:
    """dX = delta (m - X) dt + sigma dW."""

    delta: float
    m: float
    sigma: float

    def drift(self, x):
        return self.delta * (self.m - x)

    def vol(self, x):
        return self.sigma + 0.0 * x


@dataclass(frozen=True)
class ABM:
    """dX = mu dt + sigma dW."""

    mu: float
    sigma: float

    def drift(self, x):
        return self.mu + 0.0 * x

    def vol(self, x):
        return self.sigma + 0.0 * x


Dynamics = Union[GBM, OU, ABM]

_DEFAULT_INTERVAL = {GBM: (0.0, math.inf), OU: (-math.inf, math.inf), ABM: (-math.inf, math.inf)}


@dataclass(frozen=True)
class DiffusionModel:
    dynamics: Dynamics
    alpha: float
    interval: tuple[float, float] | None = None
    left: Boundary = Boundary.NATURAL
    right: Boundary = Boundary.NATURAL

    def __post_init__(self):
        if self.interval is None:
            object.__setattr__(self, "interval", _DEFAULT_INTERVAL[type(self.dynamics)])
        c, d = self.interval
        if not c < d:
            raise ValueError(f"empty state interval {self.interval}")
        if not self.alpha > 0:
            raise ValueError("discount rate alpha must be positive")
        dyn = self.dynamics
        if isinstance(dyn, GBM):
            if not dyn.beta > 0:
                raise ValueError("GBM volatility beta must be positive")
            if (c, d) != (0.0, math.inf):
                raise ValueError("GBM lives on (0, inf)")
            if self.right is not Boundary.NATURAL:
                raise ValueError("GBM right boundary is natural")
        elif isinstance(dyn, (OU, ABM)):
            if not dyn.sigma > 0:
                raise ValueError("volatility sigma must be positive")
            if isinstance(dyn, OU) and not dyn.delta > 0:
                raise ValueError("OU mean-reversion speed must be positive")
        else:
            raise UnsupportedModel(f"unknown dynamics {dyn!r}")
        if self.left is Boundary.ABSORBING and not math.isfinite(c):
            raise ValueError("absorbing boundary must be a finite endpoint")
        if self.right is Boundary.ABSORBING and not math.isfinite(d):
            raise ValueError("absorbing boundary must be a finite endpoint")

    @classmethod
    def gbm(cls, m: float, beta: float, alpha: float, left: Boundary = Boundary.NATURAL):
        return cls(GBM(m, beta), alpha, (0.0, math.inf), left, Boundary.NATURAL)

    @classmethod
    def ou(cls, delta: float, m: float, sigma: float, alpha: float,
           interval=(-math.inf, math.inf), left=Boundary.NATURAL, right=Boundary.NATURAL):
        return cls(OU(delta, m, sigma), alpha, tuple(interval), left, right)

    @classmethod
    def abm(cls, mu: float, sigma: float, alpha: float,
            interval=(-math.inf, math.inf), left=Boundary.NATURAL, right=Boundary.NATURAL):
        return cls(ABM(mu, sigma), alpha, tuple(interval), left, right)

    def drift(self, x):
        return self.dynamics.drift(x)

    def vol(self, x):
        return self.dynamics.vol(x)

    def contains(self, x) -> bool:
        c, d = self.interval
        return bool(np.all((np.asarray(x) > c) & (np.asarray(x) < d)))


def generator_apply(model: DiffusionModel, g: Callable, x: float) -> float:
    """(A - alpha) g at x, where ``g(x)`` returns ``(value, first, second)``."""
    if not model.contains(x):
        raise OutOfDomain(f"x={x} outside {model.interval}")
    v, d1, d2 = g(x)
    s = model.vol(x)
    return 0.5 * s * s * d2 + model.drift(x) * d1 - model.alpha * v


def _safe_newton(func, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Root of an increasing function on a bracket: Newton with bisection fallback."""
    flo, _ = func(lo)
    fhi, _ = func(hi)
    if flo > 0 or fhi < 0:
        raise OutOfRange("root not bracketed")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx, dfx = func(x)
        if fx == 0:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        step = fx / dfx if dfx > 0 and math.isfinite(dfx) else math.inf
        xn = x - step
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(abs(x), 1e-300) or hi - lo <= tol * max(abs(lo), abs(hi), 1e-300):
            return xn
        x = xn
    return x


@dataclass(frozen=True)
class FundamentalPair:
    """Increasing (psi) and decreasing (phi) positive solutions of (A - alpha)u = 0.

    Second derivatives come from the ODE itself; nothing is finite-differenced.
    """

    model: DiffusionModel
    psi: Callable
    phi: Callable
    dpsi: Callable
    dphi: Callable
    name: str = "custom"
    _ref: float = field(default=1.0, repr=False)

    def d2psi(self, x):
        s = self.model.vol(x)
        return 2.0 * (self.model.alpha * self.psi(x) - self.model.drift(x) * self.dpsi(x)) / (s * s)

    def d2phi(self, x):
        s = self.model.vol(x)
        return 2.0 * (self.model.alpha * self.phi(x) - self.model.drift(x) * self.dphi(x)) / (s * s)

    def psi_jet(self, x):
        return self.psi(x), self.dpsi(x), self.d2psi(x)

    def phi_jet(self, x):
        return self.phi(x), self.dphi(x), self.d2phi(x)

    def wronskian(self, x):
        return self.dpsi(x) * self.phi(x) - self.psi(x) * self.dphi(x)

    def F(self, x):
        return self.psi(x) / self.phi(x)

    def G(self, x):
        return -self.phi(x) / self.psi(x)

    def dF(self, x):
        p = self.phi(x)
        return self.wronskian(x) / (p * p)

    def dG(self, x):
        p = self.psi(x)
        return self.wronskian(x) / (p * p)

    def _bracket(self, target_logF: float) -> tuple[float, float]:
        c, d = self.model.interval
        x0 = self._ref
        def logF(x):
            return math.log(float(self.psi(x))) - math.log(float(self.phi(x)))
        lo = hi = x0
        for k in range(1, 400):
            if logF(lo) <= target_logF:
                break
            lo = c + (x0 - c) / 2.0 ** k if math.isfinite(c) else x0 - 2.0 ** k
        else:
            raise OutOfRange("F_inv: target below the range of F")
        for k in range(1, 400):
            if logF(hi) >= target_logF:
                break
            hi = d - (d - x0) / 2.0 ** k if math.isfinite(d) else x0 + 2.0 ** k
        else:
            raise OutOfRange("F_inv: target above the range of F")
        return lo, hi

    def _F_inv_scalar(self, y: float) -> float:
        if not y > 0 or not math.isfinite(y):
            raise OutOfRange(f"F_inv defined on (0, inf), got {y}")
        target = math.log(y)

        def g(x):
            ps, ph = float(self.psi(x)), float(self.phi(x))
            val = math.log(ps) - math.log(ph)
            return val - target, float(self.wronskian(x)) / (ps * ph)

        lo, hi = self._bracket(target)
        return _safe_newton(g, lo, hi)

    def F_inv(self, y):
        if np.ndim(y) == 0:
            return self._F_inv_scalar(float(y))
        return np.array([self._F_inv_scalar(float(v)) for v in np.ravel(y)]).reshape(np.shape(y))

    def G_inv(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z >= 0):
            raise OutOfRange("G_inv defined on (-inf, 0)")
        out = self.F_inv(-1.0 / z)
        return float(out) if np.ndim(out) == 0 else out

    def rescaled(self, c_psi: float, c_phi: float) -> "FundamentalPair":
        """Same pair multiplied by positive constants (downstream results must not change)."""
        if c_psi <= 0 or c_phi <= 0:
            raise ValueError("rescaling constants must be positive")
        p, q, dp, dq = self.psi, self.phi, self.dpsi, self.dphi
        return replace(
            self,
            psi=lambda x: c_psi * p(x), phi=lambda x: c_phi * q(x),
            dpsi=lambda x: c_psi * dp(x), dphi=lambda x: c_phi * dq(x),
            name=f"{self.name}*({c_psi},{c_phi})",
        )


# --- closed-form families -------------------------------------------------

def gbm_exponents(m: float, beta: float, alpha: float) -> tuple[float, float]:
    """Roots mu_+ > 0 > mu_- of 0.5 beta^2 r(r-1) + m r - alpha = 0."""
    b2 = beta * beta
    disc = math.sqrt((m - 0.5 * b2) ** 2 + 2.0 * alpha * b2)
    return (-m + 0.5 * b2 + disc) / b2, (-m + 0.5 * b2 - disc) / b2


def abm_exponents(mu: float, sigma: float, alpha: float) -> tuple[float, float]:
    s2 = sigma * sigma
    disc = math.sqrt(mu * mu + 2.0 * alpha * s2)
    return (-mu + disc) / s2, (-mu - disc) / s2


def _ou_tilde(y: float, sign: float, delta: float, alpha: float) -> tuple[float, float]:
    """exp(delta y^2/2) D_{-alpha/delta}(sign * y * sqrt(2 delta)) and its y-derivative.

    sign=-1 gives the increasing solution, +1 the decreasing one.
    """
    nu = -alpha / delta
    k = math.sqrt(2.0 * delta)
    z = sign * y * k
    log_l, jv, jd = specfun._pcf_log_parts(nu, z)
    expo = log_l + 0.5 * delta * y * y
    if expo > 709.0:
        # beyond double range; callers treat inf as "outside the usable window"
        return math.inf, math.copysign(math.inf, delta * y * jv + sign * k * jd)
    scale = math.exp(expo)
    return scale * jv, scale * (delta * y * jv + sign * k * jd)


def _ou_raw(model: DiffusionModel):
    dyn: OU = model.dynamics
    d, m, s, a = dyn.delta, dyn.m, dyn.sigma, model.alpha

    def one(sign, deriv):
        def scalar(x):
            v, dv = _ou_tilde((float(x) - m) / s, sign, d, a)
            return dv / s if deriv else v
        vec = np.vectorize(scalar, otypes=[float])

        def f(x):
            return scalar(x) if np.ndim(x) == 0 else vec(x)
        return f

    return one(-1.0, False), one(1.0, False), one(-1.0, True), one(1.0, True)


def _absorb(model: DiffusionModel, psi, phi, dpsi, dphi):
    """Replace psi (phi) by the solution vanishing at an absorbing left (right) end."""
    c, d = model.interval
    left = model.left is Boundary.ABSORBING
    right = model.right is Boundary.ABSORBING
    if left and right:
        raise UnsupportedModel("absorbing at both ends is not supported")
    if left:
        k = float(psi(c)) / float(phi(c))
        return (lambda x: psi(x) - k * phi(x), phi,
                lambda x: dpsi(x) - k * dphi(x), dphi)
    if right:
        k = float(phi(d)) / float(psi(d))
        return (psi, lambda x: phi(x) - k * psi(x),
                dpsi, lambda x: dphi(x) - k * dpsi(x))
    return psi, phi, dpsi, dphi


def fundamental_pair(model: DiffusionModel) -> FundamentalPair:
    """Closed-form fundamental solutions for the GBM, OU and ABM families."""
    dyn = model.dynamics
    a = model.alpha
    if isinstance(dyn, GBM):
        up, um = gbm_exponents(dyn.m, dyn.beta, a)
        psi = lambda x: np.power(x, up)
        phi = lambda x: np.power(x, um)
        dpsi = lambda x: up * np.power(x, up - 1.0)
        dphi = lambda x: um * np.power(x, um - 1.0)
        # x^{mu+} already vanishes at 0, so an absorbing 0 needs no correction
        return FundamentalPair(model, psi, phi, dpsi, dphi, f"gbm(mu+={up:.6g}, mu-={um:.6g})", 1.0)
    if isinstance(dyn, ABM):
        rp, rm = abm_exponents(dyn.mu, dyn.sigma, a)
        psi = lambda x: np.exp(rp * np.asarray(x, dtype=float))
        phi = lambda x: np.exp(rm * np.asarray(x, dtype=float))
        dpsi = lambda x: rp * np.exp(rp * np.asarray(x, dtype=float))
        dphi = lambda x: rm * np.exp(rm * np.asarray(x, dtype=float))
        name = f"abm(r+={rp:.6g}, r-={rm:.6g})"
    elif isinstance(dyn, OU):
        psi, phi, dpsi, dphi = _ou_raw(model)
        name = f"ou(nu={-a / dyn.delta:.6g})"
    else:
        raise UnsupportedModel(f"no closed-form fundamental solutions for {dyn!r}")
    psi, phi, dpsi, dphi = _absorb(model, psi, phi, dpsi, dphi)
    c, d = model.interval
    if math.isfinite(c) and math.isfinite(d):
        ref = 0.5 * (c + d)
    elif math.isfinite(c):
        ref = c + 1.0
    elif math.isfinite(d):
        ref = d - 1.0
    else:
        ref = dyn.m if isinstance(dyn, OU) else 0.0
    return FundamentalPair(model, psi, phi, dpsi, dphi, name, ref)


def custom_pair(model: DiffusionModel, psi, phi, dpsi, dphi, ref: float = 1.0) -> FundamentalPair:
    """User-supplied pair for dynamics outside the closed-form families."""
    return FundamentalPair(model, psi, phi, dpsi, dphi, "custom", ref)


@dataclass(frozen=True)
class PsiGrowthCheck:
    passed: bool
    ladder: tuple[float, ...]
    ratios: tuple[float, ...]
    reason: str


def check_psi_growth(pair: FundamentalPair, ladder=None, threshold: float = 1e-3) -> PsiGrowthCheck:
    """Does x / psi(x) -> 0 as x -> infinity?

    Closed-form families are decided from their exponents; otherwise the ratio
    must decrease along a geometric ladder and end below ``threshold``.
    """
    c, d = pair.model.interval
    if math.isfinite(d):
        return PsiGrowthCheck(True, (), (), "right endpoint finite: condition not required")
    if ladder is None:
        start = max(1.0, abs(c) if math.isfinite(c) else 1.0)
        ladder = tuple(start * 10.0 ** k for k in range(1, 7))
    ratios = []
    for x in ladder:
        try:
            with np.errstate(over="ignore"):
                p = float(pair.psi(x))
        except OverflowError:
            p = math.inf
        ratios.append(x / p if p > 0 else math.inf)
    ratios = tuple(ratios)
    dyn = pair.model.dynamics
    if pair.name != "custom" and not pair.name.startswith("custom*"):
        if isinstance(dyn, GBM):
            up, _ = gbm_exponents(dyn.m, dyn.beta, pair.model.alpha)
            ok = up > 1.0
            return PsiGrowthCheck(ok, tuple(ladder), ratios, f"closed form: mu+ = {up:.6g} {'>' if ok else '<='} 1")
        return PsiGrowthCheck(True, tuple(ladder), ratios, "closed form: psi grows exponentially")
    decreasing = all(b <= a for a, b in zip(ratios, ratios[1:]))
    ok = decreasing and ratios[-1] < threshold
    return PsiGrowthCheck(ok, tuple(ladder), ratios,
                          "ladder decreasing below threshold" if ok else "ladder inconclusive")
