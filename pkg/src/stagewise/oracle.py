"""Certified reference solutions and brute-force checks.

Constrained problems ``min f(x) s.t. g(x) <= t`` are solved by accelerated
projected gradient (with backtracking and adaptive restart) and certified
by the Frank-Wolfe duality gap. Frank-Wolfe itself converges at rate
``O(1/k)``, far too slowly for gaps near 1e-10; it remains available through
``method="fw"`` and is used automatically when no projection is known.

The generalized lasso with Gaussian loss is solved through its box-
constrained dual.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import lsqr

from .exceptions import InputError
from .frankwolfe import CertifiedSolution, FWConfig, run_fw
from .regularizers import GroupNorm, L1Norm, TraceNorm

# ---------------------------------------------------------------------------
# projections


def project_weighted_l1(v, w, t):
    """Project a nonnegative ``v`` onto ``{a >= 0 : sum w_i a_i <= t}``.

    Coordinates with zero weight are unconstrained.
    """
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    free = w == 0
    if np.sum(w * v) <= t:
        return v.copy()
    if t <= 0:
        return np.where(free, v, 0.0)
    ws, vs = w[~free], v[~free]
    # a_i = max(v_i - theta w_i, 0); breakpoints at theta = v_i / w_i
    r = vs / ws
    order = np.argsort(-r)
    rs, wsrt, vsrt = r[order], ws[order], vs[order]
    cw2 = np.cumsum(wsrt * wsrt)
    cwv = np.cumsum(wsrt * vsrt)
    theta = (cwv - t) / cw2
    k = np.nonzero(theta < rs)[0]
    th = theta[k[-1]] if k.size else 0.0
    out = v.copy()
    out[~free] = np.maximum(vs - th * ws, 0.0)
    return out


def project_l1_ball(x, t):
    x = np.asarray(x, dtype=np.float64)
    a = project_weighted_l1(np.abs(x).ravel(), np.ones(x.size), t)
    return np.sign(x) * a.reshape(x.shape)


def project_group_ball(x, partition, t):
    """Project onto ``{sum_j w_j ||x_{I_j}||_2 <= t}``."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.array([np.linalg.norm(x[idx]) for idx in partition.groups])
    a = project_weighted_l1(norms, partition.weights, t)
    out = np.zeros_like(x)
    for idx, n, aj in zip(partition.groups, norms, a):
        if n > 0:
            out[idx] = x[idx] * (aj / n)
    return out


def project_nuclear_ball(X, t):
    U, s, Vt = np.linalg.svd(np.asarray(X, dtype=np.float64), full_matrices=False)
    s = project_weighted_l1(s, np.ones_like(s), t)
    return (U * s) @ Vt


def _projector(reg):
    if isinstance(reg, L1Norm):
        return project_l1_ball
    if isinstance(reg, GroupNorm) and reg.all_l2:
        return lambda x, t: project_group_ball(x, reg.partition, t)
    if isinstance(reg, TraceNorm):
        return project_nuclear_ball
    return None


# ---------------------------------------------------------------------------
# constrained solves


def fw_gap(loss, reg, x, t):
    """Duality gap ``<grad f(x), x> + t g*(grad f(x))`` and ``f(x)``."""
    f, grad = loss.value_grad(x)
    return float(np.vdot(grad, x) + t * reg.dual_value(grad)), f


def _apg(loss, reg, t, proj, gap_tol, max_iter, x0):
    """FISTA with restart. With a known Lipschitz bound the step is fixed and
    momentum restarts on the gradient criterion, which keeps making progress
    after loss values stop resolving differences; otherwise backtracking
    and function-value restarts are used."""
    x = proj(loss.zeros() if x0 is None else np.array(x0, dtype=np.float64), t)
    L_fixed = loss.lipschitz_bound()
    L = L_fixed if L_fixed else 1.0
    y, theta = x, 1.0
    best = (np.inf, x, np.nan)
    it = 0
    for it in range(1, max_iter + 1):
        gap, fx = fw_gap(loss, reg, x, t)
        if gap < best[0]:
            best = (gap, x, fx)
        if gap <= gap_tol:
            break
        fy, gy = loss.value_grad(y)
        if L_fixed:
            z = proj(y - gy / L, t)
            restart = np.vdot(y - z, z - x) > 0
        else:
            while True:
                z = proj(y - gy / L, t)
                d = z - y
                fz = loss.value(z)
                if fz <= fy + np.vdot(gy, d) + 0.5 * L * np.vdot(d, d) + 1e-15 * abs(fy):
                    break
                L *= 2.0
            restart = fz > fx
            L *= 0.95
        if restart and theta > 1.0:
            y, theta = x, 1.0
            continue
        theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        y = z + ((theta - 1.0) / theta_next) * (z - x)
        x, theta = z, theta_next
    gap, x, fx = best
    return CertifiedSolution(x, float(t), float(gap), it, gap <= gap_tol, float(fx))


def solve_at(loss, reg, t, gap_tol=1e-8, method="auto", max_iter=50_000, x0=None):
    """Certified solution of ``min f(x) s.t. g(x) <= t``.

    ``method`` is ``"apg"`` (projected accelerated gradient), ``"fw"``, or
    ``"auto"`` (APG when a projection exists). Unconverged solves come back
    with ``converged=False`` rather than raising.
    """
    if t < 0:
        raise InputError("t must be >= 0")
    if t == 0:
        x = loss.zeros()
        return CertifiedSolution(x, 0.0, 0.0, 0, True, loss.value(x))
    proj = _projector(reg)
    if method == "fw" or (method == "auto" and proj is None):
        return run_fw(loss, reg, FWConfig(t, gap_tol, max_iter), x0=x0)
    if proj is None:
        raise InputError(f"no projection available for {reg.kind}")
    return _apg(loss, reg, t, proj, gap_tol, max_iter, x0)


@dataclass(frozen=True)
class OracleGrid:
    """Certified solutions on an ascending grid of ``t`` values."""

    t: np.ndarray
    solutions: tuple
    gap_tol: float

    @property
    def states(self):
        return np.array([s.x for s in self.solutions])

    @property
    def gaps(self):
        return np.array([s.gap for s in self.solutions])

    @property
    def losses(self):
        return np.array([s.loss_value for s in self.solutions])

    @property
    def converged(self):
        return np.array([s.converged for s in self.solutions])

    @property
    def failures(self):
        return [float(s.t) for s in self.solutions if not s.converged]

    def to_csv(self, dest=None):
        """Columns ``t,gap,iterations,loss,x1..xp``."""
        size = self.solutions[0].x.size if self.solutions else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "gap", "iterations", "loss"] + [f"x{i + 1}" for i in range(size)])
        for s in self.solutions:
            w.writerow([format(s.t, ".17g"), format(s.gap, ".17g"), s.iterations,
                        format(s.loss_value, ".17g")]
                       + [format(v, ".17g") for v in s.x.ravel()])
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", newline="") as fh:
                fh.write(text)
        return text


def solve_grid(loss, reg, t_list, gap_tol=1e-8, warm_start=True, method="auto",
               max_iter=50_000):
    """Certified solutions at every ``t`` in ascending ``t_list``.

    Entries that miss ``gap_tol`` are kept and flagged (see
    :attr:`OracleGrid.failures`), never replaced by interpolation.
    """
    ts = np.asarray(t_list, dtype=np.float64)
    if ts.ndim != 1 or np.any(ts < 0) or np.any(np.diff(ts) <= 0):
        raise InputError("t_list must be strictly ascending and nonnegative")
    sols = []
    prev = None
    for t in ts:
        sol = solve_at(loss, reg, t, gap_tol, method, max_iter,
                       x0=prev.x if (warm_start and prev is not None) else None)
        sols.append(sol)
        prev = sol
    return OracleGrid(ts, tuple(sols), gap_tol)


# ---------------------------------------------------------------------------
# brute-force oracle checks


def _group_values(Z, part):
    """Group-norm value of each row of ``Z``."""
    total = np.zeros(Z.shape[0])
    for idx, w, kind in zip(part.groups, part.weights, part.norms):
        ord_ = {"l2": 2, "linf": np.inf, "l1": 1}[kind]
        total += w * np.linalg.norm(Z[:, idx], ord=ord_, axis=1)
    return total


def boundary_samples(reg, eps, samples, rng, shape):
    """``samples`` random points with ``g(z) = eps``, one per row (flattened).

    group: half the points are supported on a single group (where the
    extreme points of the ball live), half are dense. trace: rank-one
    points ``eps * a b^T`` with unit ``a, b``, the extreme points of the
    nuclear ball. quadratic: points of ``row(Q)`` scaled to ``z^T Q z = eps``.
    """
    size = int(np.prod(shape))
    kind = reg.kind
    if kind == "trace":
        m, n = shape
        A = rng.standard_normal((samples, m))
        B = rng.standard_normal((samples, n))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        B /= np.linalg.norm(B, axis=1, keepdims=True)
        return eps * np.einsum("si,sj->sij", A, B).reshape(samples, size)
    Z = rng.standard_normal((samples, size))
    if kind == "group":
        part = reg.partition
        single = rng.random(samples) < 0.5
        which = rng.integers(part.n_groups, size=samples)
        keep = np.zeros((samples, size), dtype=bool)
        for j, idx in enumerate(part.groups):
            keep[np.ix_(single & (which == j), idx)] = True
        keep[~single] = True
        Z = np.where(keep, Z, 0.0)
        gz = _group_values(Z, part)
    elif kind == "quadratic":
        N = reg.qf.null_basis
        if N.shape[1]:
            Z = Z - (Z @ N) @ N.T
        Q = reg.qf.dense_matrix()
        gz = np.einsum("si,ij,sj->s", Z, Q, Z)
        ok = gz > 0
        return Z[ok] * np.sqrt(eps / gz[ok])[:, None]
    elif kind == "l1":
        gz = np.abs(Z).sum(axis=1)
    else:
        gz = np.array([reg.value(z.reshape(shape)) for z in Z])
    ok = gz > 0
    return Z[ok] * (eps / gz[ok])[:, None]


def brute_lmo_check(reg, grad, eps, samples=10_000, seed=0, tol=1e-9):
    """Compare ``reg.lmo(grad, eps)`` against brute-force candidates.

    l1: all ``2p`` vertices ``+-eps e_i``. Other kinds: ``samples`` random
    points on the boundary ``g(z) = eps`` (see :func:`boundary_samples`).
    Returns ``(ok, worst_margin)`` where the margin is
    ``min over candidates <grad, z> - <grad, delta>`` and ``ok`` also
    requires ``g(delta) <= eps + tol``.
    """
    grad = np.asarray(grad, dtype=np.float64)
    delta = reg.lmo(grad, eps)
    val = float(np.vdot(grad, delta))
    flat = grad.ravel()
    if reg.kind == "l1":
        cand = np.concatenate([eps * flat, -eps * flat])
    else:
        rng = np.random.default_rng(seed)
        cand = boundary_samples(reg, eps, samples, rng, grad.shape) @ flat
    worst = float(cand.min() - val)
    feasible = reg.value(delta) <= eps + tol
    return bool(feasible and worst >= -tol), worst


# ---------------------------------------------------------------------------
# ridge (Lagrange form of the quadratic regularizer)


@dataclass(frozen=True)
class RidgeSolutions:
    lams: np.ndarray
    betas: tuple
    ok: np.ndarray


def closed_form_ridge(X, y, Q, lam_list, cond_max=1e14):
    """``beta(lam) = (X^T X + 2 lam Q)^{-1} X^T y`` for each ``lam``.

    Singular or badly conditioned systems give ``None`` with ``ok=False``.
    """
    X = np.asarray(X, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    XtX, Xty = X.T @ X, X.T @ np.asarray(y, dtype=np.float64)
    betas, ok = [], []
    for lam in lam_list:
        A = XtX + 2.0 * lam * Q
        if np.linalg.cond(A) > cond_max:
            betas.append(None)
            ok.append(False)
            continue
        betas.append(np.linalg.solve(A, Xty))
        ok.append(True)
    return RidgeSolutions(np.asarray(lam_list, dtype=np.float64), tuple(betas), np.array(ok))


# ---------------------------------------------------------------------------
# generalized lasso, Gaussian loss


@dataclass(frozen=True)
class GenlassoSolution:
    """``beta = y - D^T u`` solves ``min 0.5||y - b||^2 + lam ||D b||_1``
    to duality gap ``gap``; ``t = ||D beta||_1``."""

    beta: np.ndarray
    u: np.ndarray
    lam: float
    t: float
    gap: float
    converged: bool


def _op_norm_bound(D):
    A = abs(D)
    return float(A.sum(axis=0).max() * A.sum(axis=1).max())


def _polish_primal(y, D, Dt, lam, beta, taus=(1e-2, 1e-4, 1e-6, np.inf)):
    """Primal refinement for the certificate.

    Rows with ``|(D beta)_i|`` below ``tau * max |D beta|`` are taken as
    fused and the other signs are frozen; the penalized objective is then
    smooth on ``{b : D_F b = 0}`` and its minimizer is the projection of
    ``y - lam D_S^T sign`` onto that subspace. Returns the candidate (the
    input included) with the smallest primal objective.
    """
    def primal(b):
        r = y - b
        return 0.5 * float(r @ r) + lam * float(np.abs(D @ b).sum())

    best, best_val = beta, primal(beta)
    d = D @ beta
    scale = float(np.abs(d).max(initial=0.0))
    if scale == 0.0:
        return best, best_val
    for tau in taus:
        fused = np.abs(d) <= tau * scale
        sgn = np.where(fused, 0.0, np.sign(d))
        z = y - lam * (Dt @ sgn)
        if fused.any():
            DF = D[fused]
            w = lsqr(DF.T, z, atol=1e-15, btol=1e-15, iter_lim=10_000)[0]
            z = z - DF.T @ w
        val = primal(z)
        if val < best_val:
            best, best_val = z, val
    return best, best_val


def genlasso_penalized(y, D, lam, gap_tol=1e-10, max_iter=100_000, u0=None,
                       polish_every=100):
    """Solve the penalized problem through its dual
    ``min_u 0.5 ||y - D^T u||^2 s.t. ||u||_inf <= lam`` by accelerated
    projected gradient, stopping at primal-dual gap ``gap_tol``.

    The gap pairs the dual value at ``u`` with the best primal point among
    ``y - D^T u`` and, every ``polish_every`` iterations, a refinement
    that fixes the fused rows and signs read off that point and solves the
    remaining smooth problem exactly. The dual side converges
    quadratically in the iterate error while the raw primal point only
    converges linearly, so the refinement reaches near-rounding gaps far
    sooner.
    """
    D = sparse.csr_matrix(D)
    y = np.asarray(y, dtype=np.float64)
    Dt = D.T.tocsr()
    L = _op_norm_bound(D)
    u = np.zeros(D.shape[0]) if u0 is None else np.clip(u0, -lam, lam)
    v, theta = u, 1.0
    half_yy = 0.5 * float(y @ y)

    def certify(u, polish):
        b = y - Dt @ u
        dual = half_yy - 0.5 * float(b @ b)
        if polish:
            b, primal = _polish_primal(y, D, Dt, lam, b)
        else:
            r = y - b
            primal = 0.5 * float(r @ r) + lam * float(np.abs(D @ b).sum())
        return primal - dual, b

    gap, beta = certify(u, bool(polish_every))
    bz = y - Dt @ u
    obj = 0.5 * float(bz @ bz)
    it = 0
    for it in range(1, max_iter + 1):
        if gap <= gap_tol:
            break
        grad = -(D @ (y - Dt @ v))
        z = np.clip(v - grad / L, -lam, lam)
        bz = y - Dt @ z
        oz = 0.5 * float(bz @ bz)
        if oz > obj:
            v, theta = u, 1.0
        else:
            theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            v = z + ((theta - 1.0) / theta_next) * (z - u)
            u, obj, theta = z, oz, theta_next
        if it % 10 == 0:
            polish = bool(polish_every) and it % polish_every == 0
            gap, beta = certify(u, polish)
    if gap > gap_tol:
        gap, beta = certify(u, bool(polish_every))
    return GenlassoSolution(beta, u, float(lam), float(np.abs(D @ beta).sum()),
                            float(gap), gap <= gap_tol)


def genlasso_lambda_max(y, D):
    """Smallest ``lam`` at which ``D beta = 0``: ``||u*||_inf`` with ``u*``
    the least-squares dual point of the projection onto ``null(D)``."""
    D = sparse.csr_matrix(D)
    u = lsqr(D.T, np.asarray(y, dtype=np.float64), atol=1e-14,
                           btol=1e-14, iter_lim=100_000)[0]
    return float(np.abs(u).max(initial=0.0))


def genlasso_path(y, D, lams, gap_tol=1e-10):
    """Penalized solutions over ``lams`` (any order), warm-started in
    decreasing-``lam`` order and returned in the input order."""
    lams = np.asarray(lams, dtype=np.float64)
    order = np.argsort(-lams)
    out = [None] * len(lams)
    u = None
    for i in order:
        sol = genlasso_penalized(y, D, lams[i], gap_tol, u0=u)
        u = sol.u
        out[i] = sol
    return out


def genlasso_constrained_value(y, D, t, tol=1e-8, max_bisect=80):
    """Certified bounds on ``min 0.5||y - b||^2 s.t. ||D b||_1 <= t``.

    Bisects on ``lam``; each penalized solution gives a feasible upper
    bound (when ``||D beta||_1 <= t``) and, for any dual point ``u``, the
    lower bound ``0.5||y||^2 - 0.5||y - D^T u||^2 - ||u||_inf t``.
    Returns ``(upper, lower, beta)``.
    """
    y = np.asarray(y, dtype=np.float64)
    D = sparse.csr_matrix(D)
    Dt = D.T.tocsr()
    half_yy = 0.5 * float(y @ y)
    if float(np.abs(D @ y).sum()) <= t:
        return 0.0, 0.0, y.copy()
    lo, hi = 0.0, genlasso_lambda_max(y, D) * (1 + 1e-9) + 1e-12
    best_up, best_beta, best_low = np.inf, None, -np.inf
    u = None
    for _ in range(max_bisect):
        lam = 0.5 * (lo + hi)
        sol = genlasso_penalized(y, D, lam, gap_tol=tol / 10, u0=u)
        u = sol.u
        r = y - Dt @ sol.u
        best_low = max(best_low, half_yy - 0.5 * float(r @ r)
                       - float(np.abs(sol.u).max(initial=0.0)) * t)
        if sol.t <= t:
            val = 0.5 * float((y - sol.beta) @ (y - sol.beta))
            if val < best_up:
                best_up, best_beta = val, sol.beta
            hi = lam
        else:
            lo = lam
        if best_up - best_low <= tol:
            break
    return best_up, best_low, best_beta


# ---------------------------------------------------------------------------
# quadratic penalty with a GLM loss (Lagrange form)


def ridge_glm(loss, qf, lam, tol=1e-10, max_iter=200, x0=None):
    """Minimize ``f(beta) + lam * beta^T Q beta`` by damped Newton.

    Iteration stops once the gradient norm is below ``tol`` times the
    norm of the loss gradient at zero (or ``tol`` if that is below one).
    Returns a :class:`CertifiedSolution` whose ``gap`` field holds the final
    gradient norm and whose ``t`` is ``beta^T Q beta``.
    """
    Q = qf.dense_matrix()
    X = loss.X
    beta = np.zeros(X.shape[1]) if x0 is None else np.array(x0, dtype=np.float64)
    tol = tol * max(1.0, float(np.linalg.norm(loss.grad(np.zeros(X.shape[1])))))

    def obj(b):
        f, g = loss.value_grad(b)
        return f + lam * float(b @ Q @ b), g + 2.0 * lam * (Q @ b)

    F, grad = obj(beta)
    it = 0
    for it in range(1, max_iter + 1):
        gn = float(np.linalg.norm(grad))
        if gn <= tol:
            break
        eta = loss.linear_predictor(beta)
        H = X.T @ (loss.variance(eta)[:, None] * X) + 2.0 * lam * Q
        step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        s = 1.0
        while True:
            cand = beta + s * step
            Fc, gc = obj(cand)
            if Fc <= F + 1e-4 * s * float(grad @ step) or s < 1e-12:
                break
            s *= 0.5
        beta, F, grad = cand, Fc, gc
    gn = float(np.linalg.norm(grad))
    return CertifiedSolution(beta, qf.quad(beta), gn, it, gn <= tol, loss.value(beta))


def ridge_glm_path(loss, qf, lams, tol=1e-10):
    """:func:`ridge_glm` over ``lams``, warm-started from large to small
    ``lam`` and returned in ascending order of ``beta^T Q beta``."""
    order = np.argsort(-np.asarray(lams, dtype=np.float64))
    sols, x = [], None
    for i in order:
        sol = ridge_glm(loss, qf, float(lams[i]), tol, x0=x)
        x = sol.x
        sols.append(sol)
    sols.sort(key=lambda s: s.t)
    return sols
