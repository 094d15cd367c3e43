"""Stagewise for the generalized lasso ``g(beta) = ||D beta||_1`` through
its dual.

Stationarity ``grad f(beta) + D^T u = 0`` ties a dual point ``u`` to a
primal one. For the Gaussian signal loss ``f = 0.5 ||y - beta||^2`` this is
``beta = y - D^T u``, and the dual stagewise step

    u_k = u_{k-1} + eps * sign(D beta_{k-1})

is the same as the primal step

    beta_k = beta_{k-1} - eps * D^T sign(D beta_{k-1}),

which pulls every pair of unequal neighbours a fixed amount toward each
other. The path starts unregularized at ``beta_0 = y`` and moves toward
more regularization.
"""

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from .engine import Path, PathRecord
from .exceptions import InputError, UnsupportedError
from .losses import GaussianSignal
from .regularizers import difference_matrix


@dataclass(frozen=True)
class PenaltyMatrix:
    """Sparse ``m x p`` penalty matrix with a tag describing its origin
    (``chain``, ``grid2d``, ``graph``, ``trend`` or ``custom``)."""

    D: sparse.csr_matrix
    tag: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        D = sparse.csr_matrix(self.D, dtype=np.float64)
        D.eliminate_zeros()
        D.sort_indices()
        if D.shape[0] and np.any(np.diff(D.indptr) == 0):
            raise InputError("penalty matrix has an all-zero row")
        object.__setattr__(self, "D", D)

    @property
    def shape(self):
        return self.D.shape

    @property
    def rows(self):
        """Each row as a list of ``(column, coefficient)`` pairs."""
        D = self.D
        return [list(zip(D.indices[a:b].tolist(), D.data[a:b].tolist()))
                for a, b in zip(D.indptr[:-1], D.indptr[1:])]

    def apply(self, beta):
        return self.D @ beta

    def penalty(self, beta):
        """``||D beta||_1``."""
        return float(np.abs(self.D @ beta).sum())

    # builders ---------------------------------------------------------------

    @classmethod
    def chain(cls, p):
        """First differences ``beta_{i+1} - beta_i``, ``(p-1) x p``."""
        if p < 2:
            raise InputError("chain needs p >= 2")
        return cls(difference_matrix(p, 1), "chain", {"p": p})

    @classmethod
    def grid2d(cls, h, w):
        """Differences across horizontally and vertically adjacent pixels of
        an ``h x w`` image stored row-major; horizontal edges come first."""
        if h < 1 or w < 1 or h * w < 2:
            raise InputError("grid2d needs at least two pixels")
        idx = np.arange(h * w).reshape(h, w)
        edges = np.concatenate([
            np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()]),
            np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])])
        D = _incidence(edges, h * w)
        return cls(D, "grid2d", {"h": h, "w": w})

    @classmethod
    def graph(cls, edges, p):
        """Edge incidence matrix: row ``(a, b)`` is ``e_b - e_a``."""
        edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= p):
            raise InputError(f"edge endpoint outside 0..{p - 1}")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise InputError("self-loops are not allowed")
        return cls(_incidence(edges, p), "graph", {"p": p})

    @classmethod
    def trend(cls, p, k):
        """Order-``k`` differences (k-fold composition of chain differences)."""
        return cls(difference_matrix(p, k), "trend", {"p": p, "k": k})

    @classmethod
    def custom(cls, D):
        """Any sparse matrix; weighted rows scale the shrinkage per row."""
        return cls(sparse.csr_matrix(D), "custom")


def _incidence(edges, p):
    m = len(edges)
    rows = np.repeat(np.arange(m), 2)
    cols = edges.ravel()
    vals = np.tile([-1.0, 1.0], m)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, p))


def _as_D(D):
    return D.D if isinstance(D, PenaltyMatrix) else sparse.csr_matrix(D)


@dataclass(frozen=True)
class DualState:
    """Dual iterate ``u``; ``sup`` is ``||u||_inf``, the matching lambda."""

    u: np.ndarray

    @property
    def sup(self):
        return float(np.abs(self.u).max(initial=0.0))


def signs(v, zero_tol=0.0):
    """``sign(v)`` with entries of magnitude ``<= zero_tol`` mapped to 0."""
    s = np.sign(v)
    if zero_tol > 0:
        s[np.abs(v) <= zero_tol] = 0.0
    return s


def dual_step(state, beta_prev, D, eps, zero_tol=0.0):
    """``u <- u + eps * sign(D beta_prev)`` componentwise, ``sign(0) = 0``."""
    s = signs(_as_D(D) @ beta_prev, zero_tol)
    return DualState(state.u + eps * s)


def primal_recover(state, loss, D):
    """Solve ``grad f(beta) + D^T u = 0`` for ``beta``.

    Only the Gaussian signal loss is supported, where ``beta = y - D^T u``.
    """
    if not isinstance(loss, GaussianSignal):
        raise UnsupportedError(
            "primal recovery is implemented only for the Gaussian signal loss "
            f"0.5||y - beta||^2 (got {loss.kind!r})")
    return loss.y - _as_D(D).T @ state.u


def default_zero_tol(y):
    """Differences this small are rounding noise from earlier steps."""
    return 1e-12 * max(1.0, float(np.abs(y).max(initial=0.0)))


def run_genlasso_gaussian(y, D, eps, max_steps, form="primal", zero_tol=None,
                          record="all"):
    """Stagewise path for ``min 0.5||y - beta||^2 s.t. ||D beta||_1 <= t``.

    ``form="primal"`` iterates ``beta <- beta - eps D^T sign(D beta)``;
    ``form="dual"`` iterates ``u`` and recovers ``beta = y - D^T u``. Each
    record holds ``t = g = ||D beta||_1``, the loss, ``beta`` and the extra
    column ``dual_sup = ||u||_inf``. Differences with magnitude below
    ``zero_tol`` count as fused (default :func:`default_zero_tol`).
    The path stops early (status ``"stationary"``) once all rows fuse.
    """
    if not eps > 0:
        raise InputError("eps must be positive")
    if form not in ("primal", "dual"):
        raise InputError(f"form must be 'primal' or 'dual', got {form!r}")
    y = np.asarray(y, dtype=np.float64)
    Dm = _as_D(D)
    Dt = Dm.T.tocsr()
    if Dm.shape[1] != y.size:
        raise InputError(f"D has {Dm.shape[1]} columns but y has length {y.size}")
    zero_tol = default_zero_tol(y) if zero_tol is None else zero_tol
    loss = GaussianSignal(y)
    keep_all = record == "all"

    start = time.perf_counter_ns()
    beta = y.copy()
    state = DualState(np.zeros(Dm.shape[0]))
    usum = np.zeros(Dm.shape[0])  # sum of signs, for ||u||_inf in primal form

    def make_record(k, beta, sup, keep):
        pen = float(np.abs(Dm @ beta).sum())
        return PathRecord(k, pen, pen, loss.value(beta), beta.copy() if keep else None,
                          time.perf_counter_ns() - start, {"dual_sup": sup})

    records = [make_record(0, beta, 0.0, True)]
    status = "max_steps"
    for k in range(1, max_steps + 1):
        s = signs(Dm @ beta, zero_tol)
        if not np.any(s):
            status = "stationary"
            break
        if form == "primal":
            beta = beta - eps * (Dt @ s)
            usum += s
            sup = eps * float(np.abs(usum).max())
        else:
            state = DualState(state.u + eps * s)
            beta = primal_recover(state, loss, Dm)
            sup = state.sup
        records.append(make_record(k, beta, sup, keep_all or k == max_steps))
    if records[-1].state is None:
        records[-1] = replace(records[-1], state=beta.copy())
    desc = {"loss": loss.kind, "regularizer": "generalized_l1", "epsilon": eps,
            "form": form, "penalty": getattr(D, "tag", "custom")}
    return Path(tuple(records), desc, status, direction="regularizing")


# ---------------------------------------------------------------------------
# IO


def read_pgm(path):
    """Read a plain (P2) PGM image, returned row-major with values in [0, 1]."""
    try:
        with open(path) as fh:
            tokens = []
            for line in fh:
                line = line.split("#", 1)[0]
                tokens.extend(line.split())
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc
    if not tokens or tokens[0] != "P2":
        raise InputError(f"{path}: not a plain PGM (P2) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    vals = np.array(tokens[4:4 + w * h], dtype=np.float64)
    if vals.size != w * h or maxval <= 0:
        raise InputError(f"{path}: truncated or malformed PGM data")
    return vals.reshape(h, w) / maxval


def write_pgm(path, img, maxval=255):
    """Write ``img`` (values clipped to [0, 1]) as a plain PGM."""
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    h, w = img.shape
    q = np.rint(img * maxval).astype(int)
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n{maxval}\n")
        for row in q:
            fh.write(" ".join(map(str, row)) + "\n")


def read_signal_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([float(r[0]) for r in rows[1:]])


def write_signal_csv(path, y):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value"])
        for v in np.asarray(y, dtype=np.float64):
            w.writerow([format(v, ".17g")])
