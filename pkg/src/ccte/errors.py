"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class CcteError(Exception):
    """Base class for all package errors."""


class DomainError(CcteError, ValueError):
    """An argument or parameter lies outside its admissible range."""


class NumericError(CcteError, ArithmeticError):
    """A computation produced a value that violates a mathematical invariant."""


class IntegrationError(NumericError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Attributes
    ----------
    best_estimate : float
        Value of the integral when the integrator gave up.
    abs_error_estimate : float
        Error estimate attached to ``best_estimate``.
    """

    def __init__(self, message: str, best_estimate: float, abs_error_estimate: float):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.abs_error_estimate = abs_error_estimate


class DegenerateTailError(CcteError):
    """The conditioning tail event carries (numerically) no probability mass."""


class InsufficientTailMassError(DegenerateTailError):
    """Too few Monte Carlo draws landed in the joint tail region."""


class SamplerError(NumericError):
    """A conditional-inverse root search did not converge."""


class IngestionError(CcteError, ValueError):
    """Input data (CSV or price matrix) is malformed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TailSampleWarning(UserWarning):
    """Empirical tail estimate rests on very few observations."""
