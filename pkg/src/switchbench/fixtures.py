"""Reference problems used by the tests, scripts and bundled configs."""

from __future__ import annotations

from .diffusion import Boundary, DiffusionModel
from .payoff import AffineIndicator, Power, RewardSpec, SwitchingProblem, validate

GBM_PARAMS = dict(m=0.01, beta=0.25, alpha=0.1)
POWER_PARAMS = dict(k0=1.8, gamma0=0.25, k1=1.2, gamma1=0.75)
OU_PARAMS = dict(delta=0.05, m=0.5, sigma=0.35, alpha=0.105)


def gbm_case(H01: float, H10: float, **overrides) -> SwitchingProblem:
    p = {**GBM_PARAMS, **POWER_PARAMS, **overrides}
    model = DiffusionModel.gbm(p["m"], p["beta"], p["alpha"])
    fam = Power(p["k0"], p["gamma0"], p["k1"], p["gamma1"])
    return validate(model, RewardSpec(fam, H01, H10))


def gbm_case1() -> SwitchingProblem:
    return gbm_case(3.0, -2.0)


def gbm_case2() -> SwitchingProblem:
    return gbm_case(1.0, 5.0)


def ou_example(K: float = 0.4, H01: float = 0.7, H10: float = -0.3) -> SwitchingProblem:
    p = OU_PARAMS
    model = DiffusionModel.ou(p["delta"], p["m"], p["sigma"], p["alpha"],
                              interval=(0.0, float("inf")), left=Boundary.ABSORBING)
    return validate(model, RewardSpec(AffineIndicator(K), H01, H10))


def degenerate() -> SwitchingProblem:
    """Identical rewards in both regimes: switching only ever costs money."""
    p = GBM_PARAMS
    model = DiffusionModel.gbm(p["m"], p["beta"], p["alpha"])
    return validate(model, RewardSpec(Power(1.0, 0.5, 1.0, 0.5), 1.0, 1.0))


def half_degenerate() -> SwitchingProblem:
    """GBM rewards with a prohibitive 1 -> 0 cost, so regime 1 never switches."""
    return gbm_case(1.0, 10.0)


def full_switch() -> SwitchingProblem:
    """Regime 0 earns nothing and is paid to leave, so it switches everywhere."""
    p = GBM_PARAMS
    model = DiffusionModel.gbm(p["m"], p["beta"], p["alpha"])
    return validate(model, RewardSpec(Power(0.0, 0.5, 1.0, 0.5), -1.0, 2.0))
