"""Explicit solutions of two-regime optimal switching problems for one-dimensional diffusions."""

from __future__ import annotations

from .diffusion import ABM, GBM, OU, Boundary, DiffusionModel, FundamentalPair, fundamental_pair
from .payoff import AffineIndicator, Custom, Power, RewardSpec, SwitchingProblem, obstacles, validate
from .smoothfit import SwitchingSolution, policy, solve, value
from .transform import classify, concavity_sets, k_functions

__all__ = [
    "ABM", "GBM", "OU", "Boundary", "DiffusionModel", "FundamentalPair", "fundamental_pair",
    "AffineIndicator", "Custom", "Power", "RewardSpec", "SwitchingProblem", "obstacles", "validate",
    "SwitchingSolution", "policy", "solve", "value", "classify", "concavity_sets", "k_functions",
]
