"""Exception hierarchy shared across the package."""


class DRPOError(Exception):
    """Base class for all package errors."""


class ParseError(DRPOError):
    """A price file cell or header could not be parsed."""


class DataError(DRPOError):
    """Input data violates a structural requirement."""


class SingularCovariance(DRPOError):
    """Scenario covariance is not positive definite."""


class DimensionMismatch(DRPOError, ValueError):
    pass


class DegenerateBase(DRPOError):
    """Portfolio has zero empirical variance, so no achiever exists."""


class InfeasibleRegion(DRPOError):
    pass


class NumericalFailure(DRPOError):
    pass


class DegenerateConstraints(DRPOError):
    pass


class BadNormalization(DRPOError):
    pass


class RangeError(DRPOError, ValueError):
    pass


class DomainError(DRPOError, ValueError):
    pass


class BracketFailure(DRPOError):
    pass


class CapExceeded(DRPOError):
    pass


class RestrictionError(DRPOError, ValueError):
    """Raised when a RestrictionSet fails validation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
