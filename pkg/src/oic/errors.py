"""Exception types raised across the package."""


class OICError(ValueError):
    """Base class for all package errors."""


class DimensionError(OICError):
    """Array shapes do not conform."""


class InputError(OICError):
    """Malformed input (asymmetric matrix, empty sample, misaligned lengths)."""


class DomainError(OICError):
    """Argument outside the mathematical domain of the operation."""


class DegenerateDataError(OICError):
    """Data carries no spread where the operation needs some."""


class InsufficientDataError(OICError):
    """Too few samples for the requested estimator."""


class SingularityError(OICError):
    """A matrix or scalar that must be inverted is (numerically) singular."""


class RankError(SingularityError):
    """Average Hessian or Gram matrix is rank deficient."""


class SolverError(OICError):
    """Iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class RefitError(OICError):
    """A refit inside a resampling evaluator failed."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfigError(OICError):
    """Experiment configuration is invalid."""
