"""Exception hierarchy for timesmear."""

from __future__ import annotations


class TimesmearError(Exception):
    """Base class for all library errors."""


class NonFinite(TimesmearError, ValueError):
    pass


class ConvergenceFailure(TimesmearError, RuntimeError):
    pass


class NotHermitian(TimesmearError, ValueError):
    pass


class BadParameter(TimesmearError, ValueError):
    pass


class NotDifferentiable(TimesmearError, ValueError):
    pass


class BoundaryViolation(TimesmearError, ValueError):
    pass


class CausticSingularity(TimesmearError, ValueError):
    pass


class EdgeProximity(TimesmearError, ValueError):
    pass


class StepTooLarge(TimesmearError, ValueError):
    pass


class Aliasing(TimesmearError, ValueError):
    pass


class MissingNode(TimesmearError, KeyError):
    pass


class OutOfWindow(TimesmearError, ValueError):
    pass


class WindowOverflow(TimesmearError, ValueError):
    pass


class NotNormalized(TimesmearError, ValueError):
    pass


class NotNormalizedSmearing(TimesmearError, ValueError):
    pass


class MixedStateUnsupported(TimesmearError, ValueError):
    pass


class DegenerateB(TimesmearError, ValueError):
    pass


class PoleAtMinusOne(TimesmearError, ValueError):
    pass


class CostBudgetExceeded(TimesmearError, ValueError):
    pass


class ConfigError(TimesmearError, ValueError):
    """Invalid scenario configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
