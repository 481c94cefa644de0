"""Exception hierarchy.

Every error raised by the package derives from :class:`PhinvError`.  Errors
that interrupt an iterative method carry the partial state they reached so a
caller can still inspect it.
"""


class PhinvError(Exception):
    """Base class for all package errors."""


class InputError(PhinvError, ValueError):
    """An argument has the wrong shape, type or value."""


class DimensionMismatch(InputError):
    pass


class InvalidSpec(InputError):
    pass


class CapExceeded(InputError):
    pass


class SingularMatrix(PhinvError, ArithmeticError):
    """A pivot fell below the singularity threshold during factorization."""


class SingularShift(SingularMatrix):
    """A shifted matrix ``A^2 + (2 pi k)^2 I`` is numerically singular."""


class SingularPhi(SingularMatrix):
    pass


class SingularHessenbergPhi(SingularMatrix):
    pass


class PoleHit(PhinvError, ArithmeticError):
    pass


class DegenerateDenominator(PhinvError, ArithmeticError):
    pass


class StripViolation(PhinvError):
    """Spectral information places an eigenvalue outside ``|Im z| <= pi/2``."""


class NotNormal(PhinvError):
    pass


class QuadratureStagnation(PhinvError):
    pass


class IterationError(PhinvError):
    """An iterative method stopped without meeting its goal.

    Attributes
    ----------
    result : object
        Last iterate (vector or matrix).
    report : object
        The solver report accumulated so far.
    """

    def __init__(self, msg, result=None, report=None):
        super().__init__(msg)
        self.result = result
        self.report = report


class NotConverged(IterationError):
    pass


class MaxitReached(NotConverged):
    pass


class Stagnation(NotConverged):
    pass


class Diverged(IterationError):
    pass


class NoConvergenceWarning(RuntimeWarning):
    """Emitted when an estimator returns its best value after the iteration cap."""


class DenseSizeWarning(UserWarning):
    """A dense code path was asked to handle a very large matrix."""
