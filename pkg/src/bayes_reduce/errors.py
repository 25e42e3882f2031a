"""Exception types shared across the package."""


class ReductionError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(ReductionError):
    """Operands have incompatible shapes."""


class NonFiniteInput(ReductionError):
    """An input contains NaN or infinite entries."""


class NotSymmetric(ReductionError):
    """A matrix expected to be symmetric is asymmetric beyond tolerance."""


class NotPositiveDefinite(ReductionError):
    """Cholesky factorization met a non-positive pivot.

    Signals that a degenerate covariance was supplied where a strictly
    positive definite one is required.
    """


class RankDeficientBasis(ReductionError):
    """A projection basis does not have full column rank."""


class EmptySpectrum(ReductionError):
    """Every signal eigenvalue is zero: the observations carry no
    information about the parameter, so any reduction is vacuous."""


class RankCollapse(ReductionError):
    """A retraction target lost column rank."""


class NonFiniteGradient(ReductionError):
    """A cost gradient evaluated to NaN or infinity."""


class MaxIterationsExceeded(ReductionError):
    """An iterative solver exhausted its iteration budget."""


class MomentOverflow(ReductionError):
    """Log-normal moment formulas would overflow double precision."""


class EmptyInput(ReductionError):
    """A non-empty collection was required."""


class PointOutOfRange(ReductionError):
    """An evaluation point lies outside the supported domain."""


class ConfigError(ReductionError):
    """An experiment configuration is malformed."""
