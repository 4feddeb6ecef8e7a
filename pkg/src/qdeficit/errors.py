"""Exception types raised across the package."""


class QDeficitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QDeficitError, ValueError):
    """Invalid grid spec, run config, or parameter value."""


class DomainError(QDeficitError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedOrderError(QDeficitError):
    """Derivative order beyond the configured maximum."""


class ParityError(QDeficitError):
    """Operation requires the opposite parity at the origin."""


class TailDivergenceError(QDeficitError):
    """Declared tail model makes a radial integral diverge, or the tail
    contribution beyond the cutoff is not negligible."""


class SingularAverageError(QDeficitError):
    """Sphere average of |z-y|^{-p} diverges (p at or beyond the n-1
    integrability threshold with source on the sphere)."""


class DivergentPotentialError(QDeficitError):
    """Input decays too slowly for the order-1 Riesz potential."""


class HypothesisViolationError(QDeficitError):
    """A required integrability/completeness hypothesis fails."""


class BackendDisagreementError(QDeficitError):
    """Independent half-Laplacian backends disagree beyond cross_tol."""


class AliasingError(QDeficitError):
    """Spectral tail of a transform exceeds the requested tolerance."""


class ResolutionError(QDeficitError):
    """Sphere quadrature rule under-resolves the integrand."""


class DimensionError(QDeficitError, ValueError):
    """Dimension outside the supported range for this operation."""
