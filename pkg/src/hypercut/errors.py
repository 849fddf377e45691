"""Exception hierarchy shared across the package.

CLI exit-code mapping: ConfigError -> 2, CapacityError -> 3, NumericError -> 4.
"""


class HypercutError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(HypercutError):
    """Invalid or inconsistent experiment configuration."""


class CapacityError(HypercutError):
    """A requested computation exceeds an enumeration or size cap."""


class NumericError(HypercutError):
    """Base class for numerical failures."""


class NumericRangeError(NumericError):
    """Inputs or intermediates left the representable floating-point range."""


class QuadratureError(NumericError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class ResolutionError(NumericError):
    """A discretization grid is too coarse for the requested accuracy."""


class DegeneracyError(NumericError):
    """An iteration that must terminate hit its safety cap."""
