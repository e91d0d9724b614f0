"""Gamma, Hermite and parabolic cylinder functions for negative degree.

Everything here is built on the integral representation

    H_nu(s) = 1/Gamma(-nu) * int_0^inf exp(-t^2 - 2 t s) t^(-nu-1) dt,   nu < 0

and D_nu(z) = 2^(-nu/2) exp(-z^2/4) H_nu(z / sqrt 2).  Internally the
integrals are returned as ``(log_scale, J)`` pairs so that callers which
multiply by large Gaussian factors (the OU fundamental solutions) can combine
exponents before exponentiating.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from scipy import integrate

from .errors import PoleError, QuadratureFailure

_LOG_TRUNC = math.log(1e18)
_SQRT2 = math.sqrt(2.0)


class QuadRule(Enum):
    ADAPTIVE_GAUSS_KRONROD = "adaptive_gauss_kronrod"


@dataclass(frozen=True)
class QuadratureSpec:
    rule: QuadRule = QuadRule.ADAPTIVE_GAUSS_KRONROD
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 256

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 2:
            # QUADPACK's weighted rule rejects a single interval
            raise ValueError("max_subdivisions must be >= 2")


DEFAULT_QUAD = QuadratureSpec()


def gamma(x: float) -> float:
    """Gamma function; raises PoleError at 0, -1, -2, ..."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x}")
    return math.gamma(x)


def _log_integrand(t: float, s: float, p: float) -> float:
    return -t * t - 2.0 * t * s + p * math.log(t)


def _peak(s: float, p: float) -> float:
    # stationary point of -t^2 - 2ts + p log t
    if p <= 0:
        return 0.0
    return 0.5 * (-s + math.sqrt(s * s + 2.0 * p))


@lru_cache(maxsize=200_000)
def _moment(p: float, s: float, spec: QuadratureSpec = DEFAULT_QUAD) -> tuple[float, float]:
    """``int_0^inf exp(-t^2 - 2ts) t^p dt`` as ``(log_scale, J)``, value = exp(log_scale) * J.

    ``log_scale`` is the log of the integrand's peak so ``J`` is O(1).
    """
    if p <= -1.0:
        raise ValueError("moment diverges at t=0 for p <= -1")
    t_star = _peak(s, p)
    if t_star > 0:
        log_scale = _log_integrand(t_star, s, p)
    else:
        # t^p has an integrable spike at 0; scale by the Gaussian factor's peak
        log_scale = s * s if s < 0 else 0.0
    # truncate where the integrand drops 1e-18 below its peak
    # start near the peak; for large positive s the mass sits within ~1/s of 0
    upper = t_star + 1.0 / (1.0 + max(s, 0.0))
    while -upper * upper - 2.0 * upper * s + p * math.log(upper) - log_scale > -_LOG_TRUNC:
        upper *= 1.5

    def f(t: float) -> float:
        # t^p is handled by the algebraic weight
        return math.exp(-t * t - 2.0 * t * s - log_scale)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(
            f, 0.0, upper, weight="alg", wvar=(p, 0.0),
            epsabs=spec.abs_tol, epsrel=spec.rel_tol,
            limit=spec.max_subdivisions, full_output=1,
        )[:3]
    if not math.isfinite(val) or err > max(spec.abs_tol, spec.rel_tol * abs(val)) * 10:
        raise QuadratureFailure(
            f"moment p={p}, s={s} did not converge (value={val}, error={err})"
        )
    return log_scale, val


def hermite(nu: float, z: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Hermite function H_nu(z) of negative degree via its integral representation."""
    if nu >= 0:
        raise ValueError("hermite is implemented for nu < 0 only")
    log_scale, j = _moment(-nu - 1.0, float(z), spec)
    return math.exp(log_scale) * j / gamma(-nu)


def _pcf_log_parts(nu: float, z: float, spec: QuadratureSpec = DEFAULT_QUAD):
    """Return (log_value_scale, value_J, deriv_J) with

    D_nu(z)  = exp(L) * Jv
    D_nu'(z) = exp(L) * Jd
    """
    s = z / _SQRT2
    p = -nu - 1.0
    ls0, j0 = _moment(p, s, spec)
    ls1, j1 = _moment(p + 1.0, s, spec)
    base = -0.5 * nu * math.log(2.0) - z * z / 4.0 - math.lgamma(-nu)
    # align the two moments on a common exponent
    common = max(ls0, ls1)
    m0 = j0 * math.exp(ls0 - common)
    m1 = j1 * math.exp(ls1 - common)
    log_l = base + common
    jv = m0
    # d/dz [2^{-nu/2} e^{-z^2/4} H(z/sqrt2)] with H'(s) = -2/Gamma * moment(p+1)
    jd = -0.5 * z * m0 - _SQRT2 * m1
    return log_l, jv, jd


def pcf(nu: float, z: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Parabolic cylinder function D_nu(z) for nu < 0."""
    if nu >= 0:
        raise ValueError("pcf is implemented for nu < 0 only")
    log_l, jv, _ = _pcf_log_parts(nu, float(z), spec)
    return math.exp(log_l) * jv


def pcf_deriv(nu: float, z: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """dD_nu/dz, by differentiating the integral representation under the integral sign."""
    if nu >= 0:
        raise ValueError("pcf_deriv is implemented for nu < 0 only")
    log_l, _, jd = _pcf_log_parts(nu, float(z), spec)
    return math.exp(log_l) * jd
