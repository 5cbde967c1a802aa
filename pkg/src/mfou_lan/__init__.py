"""Score, information and LAN diagnostics for the mixed fractional Ornstein-Uhlenbeck process."""

__version__ = "0.1.0"

from .exceptions import (BoundaryHurstError, DomainError, InvariantViolation,
                         NotPositiveDefiniteError, QuadratureError, RegimeError,
                         RemovablePointWarning, SingularityError, TruncationWarning)
from .model import (HurstRegime, LocalAlternative, ModelParams, SamplingScheme,
                    classify_regime, local_shift, scheme_from_kappa)

__all__ = [
    "__version__", "BoundaryHurstError", "DomainError", "InvariantViolation",
    "NotPositiveDefiniteError", "QuadratureError", "RegimeError", "RemovablePointWarning",
    "SingularityError", "TruncationWarning", "HurstRegime", "LocalAlternative", "ModelParams",
    "SamplingScheme", "classify_regime", "local_shift", "scheme_from_kappa",
]
