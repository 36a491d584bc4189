"""
Exception hierarchy for the tracking toolkit.
Domain functions raise these; the CLI maps them to exit codes.
"""

from typing import Optional


class TrackingError(Exception):
    """Base class for every error raised by the toolkit."""


class ParameterDomainError(TrackingError, ValueError):
    """A parameter lies outside its admissible range."""


class DegenerateSourceError(TrackingError, ValueError):
    """The source has no well-defined stationary behaviour (e.g. p = q = 0)."""


class UnsupportedCaseError(TrackingError):
    """No closed form exists for the requested (model, N, policy) combination."""


class ChannelModeError(TrackingError):
    """An operation that needs the physical channel description got a direct one."""


class DivergenceError(TrackingError, ArithmeticError):
    """A metric diverges (e.g. consecutive error at P_E = 1)."""


class ConvergenceError(TrackingError):
    """The stationary solver failed to converge."""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual

    def __str__(self) -> str:
        base = super().__str__()
        if self.residual is None:
            return base
        return f"{base} (residual {self.residual:.3e})"


class ConfigurationError(TrackingError, ValueError):
    """A run configuration, sweep axis or reproduction target is malformed or unknown."""
