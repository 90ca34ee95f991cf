"""
Exception hierarchy for the convex-surface toolkit.

Every error raised by the library derives from ``HypConvexError`` (itself a
``ValueError``) and carries the process exit code the command line maps it to.
"""


class HypConvexError(ValueError):
    """Base class for toolkit errors."""

    exit_code = 1

    def __init__(self, message: str, details: dict | None = None):
        """
        Initialize the error.

        Args:
            message: Human-readable description
            details: Optional structured data (offending nodes, spectra, ...)
        """
        super().__init__(message)
        self.details = details or {}


class ConfigurationError(HypConvexError):
    """Missing or malformed configuration value."""

    exit_code = 2


class FormatError(HypConvexError):
    """Malformed surf-grid or metric-grid input."""

    exit_code = 2


class InadmissibleMetricError(HypConvexError):
    """Target metric fails its admissibility verdict."""

    exit_code = 3


class PreconditionError(HypConvexError):
    """Input outside the domain of an operation."""

    exit_code = 4


class SolverStallError(HypConvexError):
    """Line search stalled above the requested tolerance."""

    exit_code = 5


class DegenerateGeometryError(HypConvexError):
    """Non-immersed, non-convex or otherwise degenerate geometry."""

    exit_code = 6


class VerificationFailure(HypConvexError):
    """A numerical certificate (spectral gap, invariant check) failed."""

    exit_code = 7


def exit_code_for(error: BaseException) -> int:
    """Return the exit code for an exception raised by the toolkit."""
    if isinstance(error, HypConvexError):
        return error.exit_code
    return 1
