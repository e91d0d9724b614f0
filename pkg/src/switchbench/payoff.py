"""Rewards, switching costs, the no-switch value q0 and the obstacles h0, h1."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .diffusion import (ABM, GBM, OU, Boundary, DiffusionModel, FundamentalPair,
                        check_psi_growth, fundamental_pair)
from .errors import DivergentReward, OutOfDomain, ValidationFailure


class Jet:
    """A C^2 function that can report (value, first, second) derivatives."""

    def __init__(self, fn: Callable):
        self._fn = fn

    def jet(self, x):
        return self._fn(x)

    def __call__(self, x):
        return self._fn(x)[0]

    def d1(self, x):
        return self._fn(x)[1]

    def d2(self, x):
        return self._fn(x)[2]

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(lambda x: tuple(a - b for a, b in zip(self._fn(x), other._fn(x))))
        c = float(other)

        def shifted(x):
            v, d1, d2 = self._fn(x)
            return v - c, d1, d2
        return Jet(shifted)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(lambda x: tuple(a + b for a, b in zip(self._fn(x), other._fn(x))))
        return self - (-float(other))

    def __neg__(self):
        return Jet(lambda x: tuple(-a for a in self._fn(x)))


# --- reward families ---------------------------------------------------------

@dataclass(frozen=True)
class Power:
    """f(x, i) = k_i x^gamma_i."""

    k0: float
    gamma0: float
    k1: float
    gamma1: float

    def coef(self, i):
        return (self.k0, self.gamma0) if i == 0 else (self.k1, self.gamma1)

    def f(self, x, i):
        k, g = self.coef(i)
        return k * np.power(x, g)


@dataclass(frozen=True)
class AffineIndicator:
    """f(x, i) = (x - K) * i: regime 1 runs the facility, regime 0 earns nothing."""

    K: float

    def f(self, x, i):
        return (np.asarray(x, dtype=float) - self.K) * i if np.ndim(x) else (float(x) - self.K) * i


@dataclass(frozen=True)
class Custom:
    """User rewards; ``f0`` and ``f1`` return (value, first, second) derivatives."""

    f0: Callable
    f1: Callable

    def f(self, x, i):
        fn = self.f0 if i == 0 else self.f1
        if np.ndim(x) == 0:
            return fn(x)[0]
        return np.array([fn(v)[0] for v in np.ravel(x)]).reshape(np.shape(x))


RewardFamily = Union[Power, AffineIndicator, Custom]


@dataclass(frozen=True)
class RewardSpec:
    family: RewardFamily
    H01: float
    H10: float

    def f(self, x, i):
        return self.family.f(x, i)

    def cost(self, i):
        return self.H01 if i == 0 else self.H10


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    mandatory: bool
    detail: str = ""


@dataclass(frozen=True)
class SwitchingProblem:
    model: DiffusionModel
    pair: FundamentalPair
    rewards: RewardSpec
    validation: tuple = ()
    _q0: tuple = field(default=(), repr=False)

    def q0(self, x, i):
        return self._q0[i](x)

    def q0_jet(self, i) -> Jet:
        return self._q0[i]

    def f(self, x, i):
        return self.rewards.f(x, i)

    def with_pair(self, pair: FundamentalPair) -> "SwitchingProblem":
        return assemble(self.model, self.rewards, pair, self.validation)

    @property
    def H01(self):
        return self.rewards.H01

    @property
    def H10(self):
        return self.rewards.H10


# --- q0 -----------------------------------------------------------------------

def _power_constant(model: DiffusionModel, gamma: float) -> float:
    dyn = model.dynamics
    return model.alpha - (dyn.m * gamma - 0.5 * dyn.beta ** 2 * gamma * (1.0 - gamma))


def _closed_form_q0(model: DiffusionModel, family, i: int):
    """Closed-form particular solution of (A - alpha) q = -f(., i), or None."""
    dyn = model.dynamics
    a = model.alpha
    if isinstance(family, Power) and isinstance(dyn, GBM):
        k, g = family.coef(i)
        C = _power_constant(model, g)
        if C <= 0:
            raise DivergentReward(f"E int e^(-alpha t) X^{g} dt diverges (C_{i} = {C:.6g} <= 0)")
        A = k / C
        return lambda x: (A * np.power(x, g), A * g * np.power(x, g - 1.0),
                          A * g * (g - 1.0) * np.power(x, g - 2.0))
    if isinstance(family, AffineIndicator):
        if i == 0:
            return lambda x: (0.0 * np.asarray(x, dtype=float),) * 3
        K = family.K
        if isinstance(dyn, OU):
            s = 1.0 / (dyn.delta + a)
            return lambda x: ((np.asarray(x, dtype=float) - dyn.m) * s + (dyn.m - K) / a,
                              s + 0.0 * np.asarray(x, dtype=float), 0.0 * np.asarray(x, dtype=float))
        if isinstance(dyn, ABM):
            return lambda x: ((np.asarray(x, dtype=float) - K) / a + dyn.mu / a ** 2,
                              1.0 / a + 0.0 * np.asarray(x, dtype=float), 0.0 * np.asarray(x, dtype=float))
        if isinstance(dyn, GBM):
            if a <= dyn.m:
                raise DivergentReward("GBM affine reward needs alpha > m")
            s = 1.0 / (a - dyn.m)
            return lambda x: (np.asarray(x, dtype=float) * s - K / a,
                              s + 0.0 * np.asarray(x, dtype=float), 0.0 * np.asarray(x, dtype=float))
    return None


def q0_quadrature(model: DiffusionModel, pair: FundamentalPair, rewards: RewardSpec,
                  x: float, i: int, derivative: bool = False, tol: float = 1e-9):
    """No-switch value through the resolvent (Green's function) of (A - alpha).

    q0(x) = psi(x) int_x^d phi g dy + phi(x) int_c^x psi g dy,  g = 2 f / (sigma^2 W).

    ``pair`` must already vanish at absorbing ends, which is what makes the
    boundary ratios of the classical formula drop out.
    """
    c, d = model.interval
    if not c < x < d:
        raise OutOfDomain(f"x={x} outside {model.interval}")

    def kernel(basis):
        def h(y):
            # far-tail evaluations can overflow even though the product decays
            try:
                s = model.vol(y)
                val = float(basis(y)) * 2.0 * float(rewards.f(y, i)) / (s * s * float(pair.wronskian(y)))
            except (OverflowError, ZeroDivisionError):
                return 0.0
            return val if math.isfinite(val) else 0.0
        return h

    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        right = integrate.quad(kernel(pair.phi), x, d, epsabs=tol, epsrel=1e-11, limit=400)[0]
        left = integrate.quad(kernel(pair.psi), c, x, epsabs=tol, epsrel=1e-11, limit=400)[0]
    if derivative:
        return float(pair.dpsi(x)) * right + float(pair.dphi(x)) * left
    return float(pair.psi(x)) * right + float(pair.phi(x)) * left


def _green_q0(model, pair, rewards, i):
    def fn(x):
        if np.ndim(x):
            vals = [fn(float(v)) for v in np.ravel(x)]
            return tuple(np.array(c).reshape(np.shape(x)) for c in zip(*vals))
        q = q0_quadrature(model, pair, rewards, x, i)
        dq = q0_quadrature(model, pair, rewards, x, i, derivative=True)
        s = model.vol(x)
        fx = float(rewards.f(x, i))
        return q, dq, 2.0 * (model.alpha * q - model.drift(x) * dq - fx) / (s * s)
    return fn


def boundary_corrected(problem: SwitchingProblem, i: int) -> Jet:
    """q0(., i) minus the multiple of phi (psi) that makes it vanish at an absorbing c (d).

    This is the expected reward of never switching until absorption; for natural
    boundaries it coincides with ``problem.q0``.
    """
    model, pair = problem.model, problem.pair
    q = problem.q0_jet(i)
    c, d = model.interval
    if model.left is Boundary.ABSORBING:
        k = float(q(c)) / float(pair.phi(c))
        basis = pair.phi_jet
    elif model.right is Boundary.ABSORBING:
        k = float(q(d)) / float(pair.psi(d))
        basis = pair.psi_jet
    else:
        return q
    if k == 0.0:
        return q
    return Jet(lambda x: tuple(a - k * b for a, b in zip(q.jet(x), basis(x))))


# --- obstacles -----------------------------------------------------------------

@dataclass(frozen=True)
class ObstaclePair:
    h0: Jet
    h1: Jet


def obstacles(problem: SwitchingProblem) -> ObstaclePair:
    """h0 = q0(.,1) - q0(.,0) - H01 and h1 = q0(.,0) - q0(.,1) - H10."""
    q0, q1 = problem.q0_jet(0), problem.q0_jet(1)
    return ObstaclePair((q1 - q0) - problem.H01, (q0 - q1) - problem.H10)


# --- validation ---------------------------------------------------------------

def _growth_check(model: DiffusionModel, family) -> Check:
    if isinstance(family, Power):
        ok = all(0.0 < g <= 1.0 for g in (family.gamma0, family.gamma1))
        return Check("reward_linear_growth", ok, True,
                     f"power exponents ({family.gamma0}, {family.gamma1}) must lie in (0, 1]")
    if isinstance(family, AffineIndicator):
        return Check("reward_linear_growth", True, True, "affine reward")
    c, d = model.interval
    lo = c + 1e-3 if math.isfinite(c) else -1e6
    hi = d - 1e-3 if math.isfinite(d) else 1e6
    xs = np.linspace(lo, hi, 201) if not (c == 0 and not math.isfinite(d)) else np.geomspace(1e-6, 1e6, 201)
    ratio = max(abs(float(family.f(x, i))) / (1.0 + abs(x)) for x in xs for i in (0, 1))
    return Check("reward_linear_growth", math.isfinite(ratio), False,
                 f"sampled sup |f|/(1+|x|) = {ratio:.6g}")


def _finiteness_check(model: DiffusionModel, family) -> Check:
    dyn = model.dynamics
    a = model.alpha
    if isinstance(family, Power) and isinstance(dyn, GBM):
        worst = max(dyn.m * g + 0.5 * dyn.beta ** 2 * g * g for g in (family.gamma0, family.gamma1))
        return Check("reward_finiteness", worst < a, True,
                     f"max_i m g_i + beta^2 g_i^2 / 2 = {worst:.6g} vs alpha = {a:.6g}")
    if isinstance(family, AffineIndicator) and isinstance(dyn, GBM):
        return Check("reward_finiteness", a > dyn.m, True, "alpha > m required")
    if isinstance(family, (AffineIndicator,)) or isinstance(dyn, (OU, ABM)):
        return Check("reward_finiteness", True, True, "linear reward, mean/linear drift")
    return Check("reward_finiteness", True, False, "not checked for this family")


def assemble(model: DiffusionModel, rewards: RewardSpec, pair: FundamentalPair,
             checks=()) -> SwitchingProblem:
    q = []
    for i in (0, 1):
        fn = _closed_form_q0(model, rewards.family, i)
        q.append(Jet(fn if fn is not None else _green_q0(model, pair, rewards, i)))
    return SwitchingProblem(model, pair, rewards, tuple(checks), tuple(q))


def validate(model: DiffusionModel, rewards: RewardSpec,
             pair: FundamentalPair | None = None) -> SwitchingProblem:
    """Run every standing-assumption check and assemble the problem.

    Raises ValidationFailure (carrying the full report) if a mandatory check fails.
    """
    checks = []
    total = rewards.H01 + rewards.H10
    checks.append(Check("cost_sum_positive", total > 0, True, f"H01 + H10 = {total:.6g}"))
    checks.append(Check("dynamics_linear_growth", True, True,
                        "GBM/OU/ABM coefficients grow at most linearly"))
    both = model.left is Boundary.ABSORBING and model.right is Boundary.ABSORBING
    checks.append(Check("boundary_support", not both, True,
                        "absorbing at both ends is not supported" if both else
                        f"left {model.left.value}, right {model.right.value}"))
    checks.append(_growth_check(model, rewards.family))
    checks.append(_finiteness_check(model, rewards.family))
    if pair is None and not both:
        pair = fundamental_pair(model)
    if pair is not None:
        g = check_psi_growth(pair)
        checks.append(Check("psi_growth", g.passed, True, g.reason))
    failed = [c for c in checks if c.mandatory and not c.passed]
    if failed:
        raise ValidationFailure("failed checks: " + ", ".join(c.name for c in failed), checks)
    return assemble(model, rewards, pair, checks)
