"""Regularizers given as closed-form linear minimization oracles.

Each regularizer ``g`` provides

* ``value(x)``: ``g(x)``
* ``lmo(grad, eps)``: a minimizer of ``<grad, z>`` subject to ``g(z) <= eps``
* ``dual_value(z)``: the dual norm ``max_{g(u) <= 1} <z, u>``

Ties in every argmax are broken toward the smallest index.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from .exceptions import (
    ConvergenceError, InputError, NumericalError, UnboundedDirectionError)

_NORM_KINDS = ("l2", "linf", "l1")
_DUAL_ORD = {"l2": 2, "linf": 1, "l1": np.inf}


# ---------------------------------------------------------------------------
# l1


def l1_lmo(grad, eps):
    """``-eps * sign(grad_i) * e_i`` at the first index maximizing ``|grad_i|``."""
    grad = np.asarray(grad, dtype=np.float64)
    out = np.zeros_like(grad)
    if grad.size == 0:
        return out
    i = int(np.argmax(np.abs(grad.ravel())))
    gi = grad.flat[i]
    if gi != 0:
        out.flat[i] = -eps * np.sign(gi)
    return out


# ---------------------------------------------------------------------------
# group norms


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint index groups covering ``range(p)``, with weights and a
    per-group norm (``"l2"``, ``"linf"`` or ``"l1"``)."""

    groups: tuple
    weights: np.ndarray
    norms: tuple

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=np.intp).ravel() for g in self.groups)
        if not groups:
            raise InputError("at least one group required")
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        norms = self.norms
        if isinstance(norms, str):
            norms = (norms,) * len(groups)
        norms = tuple(norms)
        if len(weights) != len(groups) or len(norms) != len(groups):
            raise InputError("one weight and one norm per group required")
        if np.any(weights < 0) or not np.any(weights > 0):
            raise InputError("weights must be >= 0 with at least one > 0")
        bad = set(norms) - set(_NORM_KINDS)
        if bad:
            raise InputError(f"unknown group norm(s) {sorted(bad)}")
        allidx = np.concatenate(groups)
        p = allidx.size
        if np.any(np.sort(allidx) != np.arange(p)):
            raise InputError("groups must partition {0, ..., p-1}")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "norms", norms)

    @property
    def p(self):
        return sum(g.size for g in self.groups)

    @property
    def n_groups(self):
        return len(self.groups)

    @classmethod
    def equal_sized(cls, p, n_groups, weights=None, norm="l2"):
        if p % n_groups:
            raise InputError(f"p={p} is not divisible into {n_groups} groups")
        size = p // n_groups
        groups = [np.arange(j * size, (j + 1) * size) for j in range(n_groups)]
        if weights is None:
            weights = np.ones(n_groups)
        return cls(tuple(groups), weights, norm)

    @classmethod
    def from_labels(cls, labels, weights=None, norm="l2"):
        labels = np.asarray(labels)
        keys = list(dict.fromkeys(labels.tolist()))
        groups = [np.flatnonzero(labels == k) for k in keys]
        if weights is None:
            weights = np.ones(len(groups))
        return cls(tuple(groups), weights, norm)


def _block_dual(block, kind):
    return float(np.linalg.norm(block, ord=_DUAL_ORD[kind]))


def _scores(grad, part, kinds):
    scores = np.empty(part.n_groups)
    for j, (idx, w) in enumerate(zip(part.groups, part.weights)):
        d = _block_dual(grad[idx], kinds[j])
        if w > 0:
            scores[j] = d / w
        else:
            scores[j] = np.inf if d > 0 else 0.0
    return scores


def _select_group(grad, part, kinds):
    scores = _scores(grad, part, kinds)
    i = int(np.argmax(scores))
    if scores[i] == 0:
        return None
    if part.weights[i] == 0:
        raise UnboundedDirectionError(
            f"group {i} has zero weight but a nonzero gradient block")
    return i


def group_l2_lmo(grad, eps, part):
    """Oracle for ``g(beta) = sum_j w_j ||beta_{I_j}||_2``."""
    grad = np.asarray(grad, dtype=np.float64)
    if any(k != "l2" for k in part.norms):
        raise InputError("group_l2_lmo requires every group norm to be l2")
    out = np.zeros_like(grad)
    i = _select_group(grad, part, part.norms)
    if i is None:
        return out
    idx = part.groups[i]
    out[idx] = -eps * _dual_subgradient(grad[idx], "l2") / part.weights[i]
    return out


def _dual_subgradient(block, kind):
    """A subgradient of the dual of ``kind`` at ``block`` (minimal support)."""
    if kind == "l2":
        return block / np.linalg.norm(block)
    if kind == "linf":
        return np.sign(block)
    s = np.zeros_like(block)
    j = int(np.argmax(np.abs(block)))
    s[j] = np.sign(block[j])
    return s


def group_general_lmo(grad, eps, part):
    """Oracle for ``g(beta) = sum_j w_j h_j(beta_{I_j})`` with each ``h_j``
    one of l2, linf, l1."""
    grad = np.asarray(grad, dtype=np.float64)
    out = np.zeros_like(grad)
    i = _select_group(grad, part, part.norms)
    if i is None:
        return out
    idx = part.groups[i]
    s = _dual_subgradient(grad[idx], part.norms[i])
    out[idx] = -eps * s / part.weights[i]
    return out


# ---------------------------------------------------------------------------
# trace norm


@dataclass(frozen=True)
class PowerMethodConfig:
    """Settings for the power iteration behind the trace-norm oracle.

    Iteration stops once the Gram eigen-residual ``||G x - rho x||`` drops
    below ``tol * rho``. If ``max_iter`` is exhausted first, the result is
    still accepted when the relative change of the Rayleigh quotient over
    the last iteration is below ``tol``. Otherwise the leading singular
    values are clustered too tightly for the iteration; with
    ``fallback="dense"`` the Gram matrix is then diagonalized directly,
    with ``fallback="raise"`` a ``ConvergenceError`` is raised.
    Gram matrices of order at most ``dense_below`` skip the iteration and
    are diagonalized directly, which is cheaper for small matrices.
    """

    tol: float = 1e-10
    max_iter: int = 1000
    seed: int = 0
    fallback: str = "dense"
    dense_below: int = 0


def top_singular_pair(A, pm=None, v0=None):
    """Leading singular triple ``(u, sigma, v)`` of a nonzero matrix ``A``.

    Power iteration runs on the smaller of ``A A^T`` and ``A^T A``; the
    other factor is recovered by one multiplication. ``v0`` optionally
    warm-starts the iteration (in the space of the smaller Gram matrix).
    """
    pm = pm or PowerMethodConfig()
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    left = m <= n
    G = A @ A.T if left else A.T @ A
    k = G.shape[0]
    if k <= pm.dense_below:
        return _finish_pair(A, left, linalg.eigh(G, subset_by_index=[k - 1, k - 1])[1][:, 0])
    if v0 is not None and np.linalg.norm(v0) > 0:
        x = np.asarray(v0, dtype=np.float64).ravel().copy()
    else:
        x = np.random.default_rng(pm.seed).standard_normal(k)
    x /= np.linalg.norm(x)
    rho_prev = np.nan
    rel_change = np.inf
    resid = np.inf
    converged = False
    it = 0
    for it in range(1, pm.max_iter + 1):
        w = G @ x
        rho = float(x @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # x is orthogonal to the range; restart along a coordinate that
            # carries the most energy
            x = np.zeros(k)
            x[int(np.argmax(np.diag(G)))] = 1.0
            continue
        resid = np.linalg.norm(w - rho * x)
        if rho_prev == rho_prev:
            rel_change = abs(rho - rho_prev) / max(abs(rho), np.finfo(float).tiny)
        rho_prev = rho
        if resid <= pm.tol * rho:
            converged = True
            break
        x = w / nw
    if not converged and not rel_change <= pm.tol:
        if pm.fallback != "dense":
            raise ConvergenceError(
                f"power iteration did not converge in {pm.max_iter} iterations",
                residual=float(resid / max(rho_prev, np.finfo(float).tiny)),
                iterations=it)
        x = linalg.eigh(G, subset_by_index=[k - 1, k - 1])[1][:, 0]
    return _finish_pair(A, left, x)


def _finish_pair(A, left, x):
    """Fix the sign of the Gram eigenvector ``x`` and recover the other factor."""
    j = int(np.argmax(np.abs(x)))
    if x[j] < 0:
        x = -x
    if left:
        u = x
        v = A.T @ u
        sigma = np.linalg.norm(v)
        v = v / sigma
    else:
        v = x
        u = A @ v
        sigma = np.linalg.norm(u)
        u = u / sigma
    return u, float(sigma), v


def trace_lmo(grad, eps, pm=None, v0=None):
    """``-eps * u v^T`` with ``(u, v)`` the leading singular vectors of
    ``grad`` (zero when ``grad`` is zero)."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.ndim != 2:
        raise InputError("trace-norm oracle needs a matrix gradient")
    if not np.any(grad):
        return np.zeros_like(grad)
    u, _, v = top_singular_pair(grad, pm, v0)
    return -eps * np.outer(u, v)


# ---------------------------------------------------------------------------
# quadratic forms


def _upper_band(Q, bw):
    """Pack the upper triangle of a symmetric banded matrix for LAPACK."""
    p = Q.shape[0]
    ab = np.zeros((bw + 1, p))
    for d in range(bw + 1):
        ab[bw - d, d:] = np.diagonal(Q, d)
    return ab


def _bandwidth(M):
    M = sparse.coo_matrix(M)
    nz = M.data != 0
    if not np.any(nz):
        return 0
    return int(np.max(np.abs(M.row[nz] - M.col[nz])))


def _banded_cholesky(S, bw, what):
    """Banded Cholesky factor of ``S``; pivots that are zero up to
    rounding (squared pivot below ``1e-12`` of the largest diagonal entry)
    count as a failure."""
    try:
        cb = linalg.cholesky_banded(_upper_band(S, bw))
    except linalg.LinAlgError as exc:
        raise NumericalError(f"{what}: {exc}") from exc
    piv = cb[bw] ** 2
    if piv.min() <= 1e-12 * max(np.abs(np.diagonal(S)).max(), np.finfo(float).tiny):
        raise NumericalError(f"{what}: numerically singular")
    return cb


def difference_matrix(p, order=1):
    """Order-``order`` discrete difference operator, ``(p - order) x p``.

    Row ``i`` of the first-order operator is ``e_{i+1} - e_i``; higher
    orders are compositions of first-order operators.
    """
    if order < 1 or order >= p:
        raise InputError(f"need 1 <= order < p, got order={order}, p={p}")
    D = sparse.identity(p, format="csr")
    for k in range(order):
        q = p - k
        Dk = sparse.diags([-np.ones(q - 1), np.ones(q - 1)], [0, 1],
                          shape=(q - 1, q), format="csr")
        D = Dk @ D
    return D.tocsr()


def polynomial_null_basis(p, order):
    """Orthonormal basis of polynomials of degree < ``order`` on ``0..p-1``,
    i.e. the null space of the order-``order`` difference operator."""
    x = np.linspace(-1.0, 1.0, p)
    V = np.vander(x, order, increasing=True)
    q, _ = np.linalg.qr(V)
    return q


class QuadraticForm:
    """Positive semidefinite ``Q`` with a cached factorization.

    Use one of the constructors:

    * :meth:`dense` -- Cholesky if ``Q`` is definite, otherwise an
      eigendecomposition with rank threshold ``1e-10 * ||Q||_inf``.
    * :meth:`banded` -- banded Cholesky (``Q`` must be definite).
    * :meth:`difference_product` -- ``Q = D^T D`` held through ``D``, with
      ``Q^+ = D^T (D D^T)^{-2} D`` applied via a banded factorization of
      ``D D^T``.
    """

    def __init__(self, p, structure, null_basis):
        self.p = int(p)
        self.structure = structure
        self.null_basis = null_basis if null_basis is not None else np.zeros((p, 0))

    # -- constructors -------------------------------------------------------

    @classmethod
    def dense(cls, Q):
        Q = cls._check_psd(Q)
        p = Q.shape[0]
        scale = max(np.abs(Q).sum(axis=1).max(), np.finfo(float).tiny)
        evals, evecs = linalg.eigh(Q)
        keep = evals > 1e-10 * scale
        self = cls(p, "dense", evecs[:, ~keep])
        self.Q = Q
        if np.all(keep):
            self._chol = linalg.cho_factor(Q)
        else:
            self._chol = None
            self._evecs = evecs[:, keep]
            self._inv_evals = 1.0 / evals[keep]
        return self

    @classmethod
    def banded(cls, Q, bandwidth=None):
        Q = cls._check_psd(Q)
        bw = _bandwidth(Q) if bandwidth is None else int(bandwidth)
        if _bandwidth(Q) > bw:
            raise InputError(f"Q has entries outside bandwidth {bw}")
        self = cls(Q.shape[0], "banded", None)
        self.Q = Q
        self.bandwidth = bw
        self._cb = _banded_cholesky(Q, bw, "banded Cholesky failed")
        return self

    @classmethod
    def difference_product(cls, D, null_basis=None):
        D = sparse.csr_matrix(D, dtype=np.float64)
        m, p = D.shape
        if m >= p:
            raise InputError("difference_product needs a wide D (m < p)")
        if null_basis is None:
            _, _, vt = np.linalg.svd(D.toarray())
            null_basis = vt[m:].T
        self = cls(p, "difference_product", null_basis)
        self.D = D
        S = (D @ D.T).toarray()
        self.bandwidth = _bandwidth(S)
        self._cb = _banded_cholesky(S, self.bandwidth,
                                    "D D^T is not definite (D lacks full row rank)")
        return self

    @classmethod
    def difference(cls, p, order):
        """``Q = D^T D`` for the order-``order`` difference operator on ``p``
        points; the null space is the polynomials of degree < ``order``."""
        D = difference_matrix(p, order)
        self = cls.difference_product(D, polynomial_null_basis(p, order))
        self.order = order
        return self

    @staticmethod
    def _check_psd(Q):
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise InputError("Q must be square")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12:
            raise InputError("Q must be symmetric")
        if Q.shape[0] <= 50 and np.linalg.eigvalsh(Q).min() < -1e-10:
            raise InputError("Q must be positive semidefinite")
        return Q

    # -- operations ---------------------------------------------------------

    @property
    def null_dim(self):
        return self.null_basis.shape[1]

    def dense_matrix(self):
        if self.structure == "difference_product":
            return (self.D.T @ self.D).toarray()
        return self.Q

    def quad(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.structure == "difference_product":
            d = self.D @ x
            return float(d @ d)
        return float(x @ (self.Q @ x))

    def project_row(self, z):
        """Orthogonal projection onto ``row(Q)``."""
        z = np.asarray(z, dtype=np.float64)
        N = self.null_basis
        if N.shape[1] == 0:
            return z.copy()
        return z - N @ (N.T @ z)

    def solve(self, g):
        """``Q^{-1} g`` (definite) or ``Q^+ g`` (singular)."""
        g = np.asarray(g, dtype=np.float64)
        if self.structure == "difference_product":
            w = linalg.cho_solve_banded((self._cb, False), self.D @ g)
            w = linalg.cho_solve_banded((self._cb, False), w)
            return self.D.T @ w
        if self.structure == "banded":
            return linalg.cho_solve_banded((self._cb, False), g)
        if self._chol is not None:
            return linalg.cho_solve(self._chol, g)
        V = self._evecs
        return V @ (self._inv_evals * (V.T @ g))


def quad_lmo(grad, eps, qf):
    """Minimize ``<grad, z>`` over ``z in row(Q)`` with ``z^T Q z <= eps``."""
    grad = np.asarray(grad, dtype=np.float64)
    g = qf.project_row(grad)
    gn = np.linalg.norm(g)
    if gn == 0.0 or gn <= 1e-12 * np.linalg.norm(grad):
        return np.zeros_like(grad)
    v = qf.solve(g)
    s = float(g @ v)
    if not s > 0:
        return np.zeros_like(grad)
    return -np.sqrt(eps) * v / np.sqrt(s)


# ---------------------------------------------------------------------------
# regularizer objects


class Regularizer:
    kind = "abstract"
    is_norm = True

    def value(self, x):
        raise NotImplementedError

    def lmo(self, grad, eps):
        raise NotImplementedError

    def dual_value(self, z):
        raise NotImplementedError

    @property
    def null_dim(self):
        return 0

    def __repr__(self):
        return f"{type(self).__name__}()"


class L1Norm(Regularizer):
    kind = "l1"

    def value(self, x):
        return float(np.abs(x).sum())

    def lmo(self, grad, eps):
        return l1_lmo(grad, eps)

    def dual_value(self, z):
        return float(np.abs(z).max(initial=0.0))


class GroupNorm(Regularizer):
    """``sum_j w_j h_j(x_{I_j})`` over a :class:`GroupPartition`."""

    kind = "group"

    def __init__(self, partition):
        self.partition = partition
        self.all_l2 = all(k == "l2" for k in partition.norms)

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        part = self.partition
        total = 0.0
        for idx, w, kind in zip(part.groups, part.weights, part.norms):
            ord_ = {"l2": 2, "linf": np.inf, "l1": 1}[kind]
            total += w * np.linalg.norm(x[idx], ord=ord_)
        return float(total)

    def lmo(self, grad, eps):
        if self.all_l2:
            return group_l2_lmo(grad, eps, self.partition)
        return group_general_lmo(grad, eps, self.partition)

    def dual_value(self, z):
        z = np.asarray(z, dtype=np.float64)
        return float(np.max(_scores(z, self.partition, self.partition.norms)))

    def __repr__(self):
        return f"GroupNorm(G={self.partition.n_groups}, p={self.partition.p})"


class TraceNorm(Regularizer):
    """Sum of singular values; the oracle uses power iteration."""

    kind = "trace"

    def __init__(self, pm=None):
        self.pm = pm or PowerMethodConfig()

    def value(self, X):
        return float(np.linalg.svd(np.asarray(X, dtype=np.float64),
                                   compute_uv=False).sum())

    def lmo(self, grad, eps):
        return trace_lmo(grad, eps, self.pm)

    def dual_value(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        if not np.any(Z):
            return 0.0
        return float(np.linalg.norm(Z, ord=2))


class QuadraticRegularizer(Regularizer):
    """``g(beta) = beta^T Q beta``. Not a norm: steps are confined to
    ``row(Q)`` and ``dual_value`` is ``sqrt(z^T Q^+ z)`` on that subspace."""

    kind = "quadratic"
    is_norm = False

    def __init__(self, qf):
        self.qf = qf

    @property
    def null_dim(self):
        return self.qf.null_dim

    def value(self, x):
        return self.qf.quad(x)

    def lmo(self, grad, eps):
        return quad_lmo(grad, eps, self.qf)

    def dual_value(self, z):
        g = self.qf.project_row(z)
        return float(np.sqrt(max(g @ self.qf.solve(g), 0.0)))

    def __repr__(self):
        return f"QuadraticRegularizer({self.qf.structure}, p={self.qf.p})"


def reg_value(x, reg):
    return reg.value(x)


def reg_dual_value(z, reg):
    return reg.dual_value(z)
