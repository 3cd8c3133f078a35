"""Exception hierarchy for heatkern."""


class HeatKernError(Exception):
    """Base class for all library errors."""


class EllipticityError(HeatKernError, ValueError):
    """Symbol fails the strong ellipticity (or sector) condition."""


class TruncationError(HeatKernError):
    """Frequency truncation leaves a tail above the requested tolerance."""


class DomainError(HeatKernError, ValueError):
    """Argument outside the domain of the operation (e.g. Re t < 0)."""


class ContourError(HeatKernError):
    """Quadrature contour is not admissible for the given spectrum."""


class AccuracyError(HeatKernError):
    """Numerical quadrature did not reach the requested accuracy."""


class ConfigError(HeatKernError, ValueError):
    """Malformed or unknown run configuration."""
