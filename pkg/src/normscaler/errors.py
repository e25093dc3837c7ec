"""Exception types shared across the package."""


class NormscalerError(Exception):
    """Base class for every error raised by this package."""


class SpecInvalid(NormscalerError):
    """A target or design specification violates its invariants."""


class DimensionMismatch(NormscalerError):
    """Operands have incompatible shapes."""


class DomainError(NormscalerError):
    """Argument lies outside the mathematical domain of an operation."""


class NonFiniteError(NormscalerError):
    """NaN or infinity where a finite value is required."""


class DegenerateInstance(NormscalerError):
    """Instance admits no meaningful solve (e.g. all correlations vanish)."""


class SingularGram(NormscalerError):
    """The Gram matrix X X^T could not be factorized."""


class BracketInvalid(NormscalerError):
    """A bisection bracket does not enclose the target value."""


class DegenerateFit(NormscalerError):
    """Too few abscissae to fit the requested model."""


class InsufficientPoints(NormscalerError):
    """Not enough data points inside the fit window."""


class NonPositiveValue(NormscalerError):
    """Log-scale fit given a value <= 0."""


class SchemaMismatch(NormscalerError):
    """A CSV header does not match the fixed sweep-record schema."""
