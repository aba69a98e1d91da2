"""Semantic exception hierarchy shared by all meanclt modules."""

from __future__ import annotations


class MeancltError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(MeancltError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class PreconditionError(MeancltError, ValueError):
    """A documented precondition does not hold (e.g. non-martingale input)."""


class DegenerateVarianceError(MeancltError):
    """The long-run variance is zero or negative; normalized limits are undefined."""


class DivergenceError(MeancltError):
    """A series required by the operation diverges (e.g. rational resonance)."""


class ResourceError(MeancltError):
    """The exact computation would exceed the feasible index/size range."""


class PrecisionError(MeancltError):
    """Double precision is insufficient to certify the requested quantity."""


class SchemaError(MeancltError, ValueError):
    """Serialized artifacts disagree on schema; lists the offending fields."""


class AccuracyError(MeancltError):
    """Adaptive quadrature failed to converge within the recursion budget.

    Carries the best available estimate and a bound on its error so callers
    can decide whether the degraded value is still usable.
    """

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (best estimate {estimate!r}, error bound {error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound
