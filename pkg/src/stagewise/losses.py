"""Smooth convex losses with exact gradients.

Every loss exposes ``value_grad(x) -> (float, ndarray)`` plus ``value`` and
``grad`` shortcuts, and a ``shape`` attribute describing the parameter
domain (``(p,)`` for coefficient vectors, ``(m, n)`` for matrices).
Evaluation never mutates the stored data, so a loss can be shared freely.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import expit

from .exceptions import InputError

# Linear predictors are clamped to this range before exponentiation.
ETA_CLAMP = 30.0


def _as_design(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise InputError(f"X must be 2-d, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise InputError(
            f"y must be a vector of length {X.shape[0]}, got shape {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("X and y must be finite")
    return X, y


def _check_param(x, shape):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != tuple(shape):
        raise InputError(f"parameter has shape {x.shape}, expected {shape}")
    return x


class Loss:
    """Common interface. Subclasses implement :meth:`value_grad`."""

    kind = "abstract"
    shape = ()

    def value_grad(self, x):
        raise NotImplementedError

    def value(self, x):
        return self.value_grad(x)[0]

    def grad(self, x):
        return self.value_grad(x)[1]

    def zeros(self):
        return np.zeros(self.shape)

    def lipschitz_bound(self):
        """Global Lipschitz constant of the gradient in the Euclidean norm,
        or ``None`` when there is none."""
        return None

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape})"


class LeastSquares(Loss):
    """``f(beta) = 0.5 * ||y - X beta||^2``."""

    kind = "least_squares"

    def __init__(self, X, y):
        self.X, self.y = _as_design(X, y)
        self.shape = (self.X.shape[1],)

    def value_grad(self, beta):
        beta = _check_param(beta, self.shape)
        r = self.y - self.X @ beta
        return 0.5 * float(r @ r), -(self.X.T @ r)

    def lipschitz_bound(self):
        return float(np.linalg.norm(self.X, ord=2) ** 2)


class GLM(Loss):
    """Negative log-likelihood of a logistic or Poisson regression.

    logistic: ``sum(log(1 + exp(eta)) - y * eta)``
    poisson:  ``sum(exp(eta) - y * eta)``

    with ``eta = X beta`` clamped to ``[-30, 30]``. Terms constant in
    ``beta`` (e.g. ``log y!``) are dropped.
    """

    def __init__(self, X, y, family):
        self.X, self.y = _as_design(X, y)
        if family == "logistic":
            if not np.all((self.y == 0) | (self.y == 1)):
                raise InputError("logistic family requires y in {0, 1}")
        elif family == "poisson":
            if np.any(self.y < 0):
                raise InputError("poisson family requires y >= 0")
        else:
            raise InputError(f"unknown GLM family {family!r}")
        self.family = family
        self.kind = family
        self.shape = (self.X.shape[1],)

    def linear_predictor(self, beta):
        return np.clip(self.X @ beta, -ETA_CLAMP, ETA_CLAMP)

    def mean(self, eta):
        if self.family == "logistic":
            return expit(eta)
        return np.exp(eta)

    def variance(self, eta):
        """Derivative of the mean w.r.t. ``eta`` (the IRLS weights)."""
        mu = self.mean(eta)
        if self.family == "logistic":
            return mu * (1.0 - mu)
        return mu

    def value_grad(self, beta):
        beta = _check_param(beta, self.shape)
        eta = self.linear_predictor(beta)
        mu = self.mean(eta)
        if self.family == "logistic":
            # logaddexp(0, eta) == log(1 + exp(eta)) without overflow
            value = float(np.sum(np.logaddexp(0.0, eta) - self.y * eta))
        else:
            value = float(np.sum(mu - self.y * eta))
        return value, -(self.X.T @ (self.y - mu))

    def lipschitz_bound(self):
        if self.family == "logistic":
            return 0.25 * float(np.linalg.norm(self.X, ord=2) ** 2)
        return None


def Logistic(X, y):
    return GLM(X, y, "logistic")


def Poisson(X, y):
    return GLM(X, y, "poisson")


@dataclass(frozen=True)
class ObservedMatrix:
    """Partially observed matrix: ``values[k]`` sits at ``(rows[k], cols[k])``."""

    shape: tuple
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        m, n = self.shape
        rows = np.asarray(self.rows, dtype=np.intp)
        cols = np.asarray(self.cols, dtype=np.intp)
        values = np.asarray(self.values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape and rows.ndim == 1):
            raise InputError("rows, cols and values must be equal-length vectors")
        if rows.size == 0:
            raise InputError("at least one entry must be observed")
        if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
            raise InputError("observed index outside matrix dimensions")
        if not np.all(np.isfinite(values)):
            raise InputError("observed values must be finite")
        if np.unique(rows * n + cols).size != rows.size:
            raise InputError("duplicate observed entries")
        object.__setattr__(self, "shape", (int(m), int(n)))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_dense(cls, Y, mask):
        Y = np.asarray(Y, dtype=np.float64)
        rows, cols = np.nonzero(np.asarray(mask, dtype=bool))
        return cls(Y.shape, rows, cols, Y[rows, cols])

    @property
    def mask(self):
        out = np.zeros(self.shape, dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def to_dense(self, fill=0.0):
        out = np.full(self.shape, fill, dtype=np.float64)
        out[self.rows, self.cols] = self.values
        return out


class MatrixCompletion(Loss):
    """``f(B) = 0.5 * sum over observed (i, j) of (Y_ij - B_ij)^2``."""

    kind = "matrix_completion"

    def __init__(self, observed):
        self.observed = observed
        self.shape = observed.shape

    def value_grad(self, B):
        B = _check_param(B, self.shape)
        obs = self.observed
        diff = B[obs.rows, obs.cols] - obs.values
        G = np.zeros(self.shape)
        G[obs.rows, obs.cols] = diff
        return 0.5 * float(diff @ diff), G

    def lipschitz_bound(self):
        return 1.0

    def grad_sparse(self, B):
        """Gradient as a COO matrix whose stored pattern is exactly the
        observed set (explicit zeros kept)."""
        B = _check_param(B, self.shape)
        obs = self.observed
        diff = B[obs.rows, obs.cols] - obs.values
        return sparse.coo_matrix((diff, (obs.rows, obs.cols)), shape=self.shape)


class GaussianSignal(Loss):
    """Signal approximator ``f(beta) = 0.5 * ||y - beta||^2``.

    Its conjugate gradient is available in closed form, ``z -> y + z``.
    """

    kind = "gaussian_signal"

    def __init__(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 1 or not np.all(np.isfinite(y)):
            raise InputError("y must be a finite vector")
        self.y = y
        self.shape = y.shape

    def value_grad(self, beta):
        beta = _check_param(beta, self.shape)
        r = self.y - beta
        return 0.5 * float(r @ r), beta - self.y

    def lipschitz_bound(self):
        return 1.0

    def conj_grad(self, z):
        return self.y + np.asarray(z, dtype=np.float64)


def least_squares_value_grad(beta, X, y):
    return LeastSquares(X, y).value_grad(beta)


def glm_value_grad(beta, X, y, family):
    return GLM(X, y, family).value_grad(beta)


def matcomp_value_grad(B, observed):
    return MatrixCompletion(observed).value_grad(B)


def gaussian_signal_value_grad_conj(beta, y):
    """Return ``(value, grad, conj_grad)`` for the Gaussian signal loss."""
    loss = GaussianSignal(y)
    value, grad = loss.value_grad(beta)
    return value, grad, loss.conj_grad
