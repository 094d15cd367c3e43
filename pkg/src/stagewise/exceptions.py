"""Exception types raised across the package."""


class StagewiseError(Exception):
    """Base class for all errors raised by this package."""


class InputError(StagewiseError, ValueError):
    """Malformed or inconsistent input (shapes, labels, ranges)."""


class UnboundedDirectionError(StagewiseError):
    """The linear minimization oracle has no finite minimizer.

    Raised when the gradient has a nonzero component along the null space
    of a seminorm regularizer, e.g. a zero-weight group.
    """


class ConvergenceError(StagewiseError):
    """An inner iterative routine did not converge.

    Attributes
    ----------
    residual : float
        The last residual reached before giving up.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericalError(StagewiseError, ArithmeticError):
    """Non-finite values or a failed factorization."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class UnsupportedError(StagewiseError, NotImplementedError):
    """The requested combination of loss/regularizer is not supported."""


class InfeasibleError(InputError):
    """A point violates the constraint g(x) <= t."""


class PathRangeError(InputError):
    """Requested parameter lies outside the recorded range of a path."""
