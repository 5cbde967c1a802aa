"""Exception and warning types raised across the package."""


class DomainError(ValueError):
    """Input lies outside the admissible parameter or sampling domain."""


class BoundaryHurstError(DomainError):
    """Hurst index sits exactly on a regime boundary (1/2 or 3/4)."""


class RegimeError(DomainError):
    """Operation requested for a Hurst regime that does not support it."""


class SingularityError(DomainError):
    """Symbol evaluated at a point where it diverges."""


class QuadratureError(RuntimeError):
    """Quadrature refinement exhausted its budget without meeting the tolerance."""


class NotPositiveDefiniteError(RuntimeError):
    """Covariance matrix failed Cholesky factorization even after jitter."""


class InvariantViolation(RuntimeError):
    """An exact algebraic identity failed beyond floating-point tolerance."""


class TruncationWarning(RuntimeWarning):
    """Truncated aliasing sum did not meet the requested relative tolerance."""


class RemovablePointWarning(RuntimeWarning):
    """Symbol evaluated at lambda = 0 where it is bounded (H < 1/2)."""
