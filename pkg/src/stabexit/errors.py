"""Exception hierarchy shared by all modules."""


class StabExitError(Exception):
    """Base class for errors raised by this package."""


class DomainError(StabExitError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class DegenerateDirectionError(DomainError):
    """A direction vector vanished where a nonzero one is required."""


class ConfigError(StabExitError, ValueError):
    """An experiment or simulation configuration is invalid."""


class QuadratureError(StabExitError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance.

    The partial value and its error estimate are kept so callers can
    decide whether the result is still usable.
    """

    def __init__(self, message, value=float("nan"), error_estimate=float("inf")):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class CrossCheckError(StabExitError, AssertionError):
    """Closed form and quadrature disagree beyond the combined tolerance."""
