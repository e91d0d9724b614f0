"""Exception hierarchy shared by all solver stages."""

from __future__ import annotations


class SwitchbenchError(Exception):
    """Base class for every error raised by the package."""


class UnsupportedModel(SwitchbenchError):
    pass


class OutOfDomain(SwitchbenchError):
    pass


class OutOfRange(SwitchbenchError):
    pass


class PoleError(SwitchbenchError):
    pass


class QuadratureFailure(SwitchbenchError):
    pass


class DivergentReward(SwitchbenchError):
    pass


class ValidationFailure(SwitchbenchError):
    """Raised by ``validate`` when a mandatory check fails.

    ``checks`` holds the full report, including the checks that passed.
    """

    def __init__(self, message: str, checks=()):
        super().__init__(message)
        self.checks = list(checks)


class ScanInconclusive(SwitchbenchError):
    pass


class DegenerateGrid(SwitchbenchError):
    pass


class NoConvergence(SwitchbenchError):
    def __init__(self, message: str, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class HypothesisViolated(SwitchbenchError):
    pass


class NotConverged(SwitchbenchError):
    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class ExplodedPath(SwitchbenchError):
    pass


class ConfigError(SwitchbenchError):
    pass
