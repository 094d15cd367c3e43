"""General stagewise driver, its shrunken variant, and path utilities.

The pure update is ``x_k = x_{k-1} + lmo(grad f(x_{k-1}), eps)`` with static
parameter ``t_k = t0 + k * eps``. The shrunken update multiplies the previous
iterate by ``alpha`` first, ``x_k = alpha * x_{k-1} + lmo(...)``, and tracks
``t_k = alpha * t_{k-1} + eps``.
"""

import csv
import hashlib
import io
import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import (
    ConvergenceError, InputError, NumericalError, PathRangeError,
    UnsupportedError)
from .losses import GLM, GaussianSignal, LeastSquares

STALL_RUN = 5          # consecutive small g-changes that trigger a g-stall stop
MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class StagewiseConfig:
    """Settings for one stagewise run.

    Parameters
    ----------
    epsilon : float
        Step size, > 0.
    max_steps : int
        Maximum number of updates.
    alpha : float or "auto"
        Shrink factor in (0, 1]; 1 is the pure algorithm. ``"auto"`` sets
        ``1 - alpha = epsilon / 10``.
    t0 : float
        Static parameter of the starting point.
    x0 : ndarray, optional
        Starting state. Defaults to zero (or, for a quadratic seminorm, the
        loss minimizer over the null space).
    stop_g_stall : float, optional
        Stop once ``|g(x_k) - g(x_{k-1})|`` stays below this for 5 steps.
    record : "all", "endpoints", int or None
        Which states to keep: every step, only first/last, or every j-th
        step (plus the last). ``None`` keeps every ``max(1, max_steps // 500)``.
    track_g : bool
        Evaluate ``g(x_k)`` at each step (costly for the trace norm).
    """

    epsilon: float
    max_steps: int
    alpha: object = 1.0
    t0: float = 0.0
    x0: Optional[np.ndarray] = None
    stop_g_stall: Optional[float] = None
    record: object = None
    track_g: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise InputError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise InputError(f"max_steps must be a positive integer, got {self.max_steps}")
        if isinstance(self.alpha, str):
            if self.alpha != "auto":
                raise InputError(f"alpha must be a number or 'auto', got {self.alpha!r}")
            object.__setattr__(self, "alpha", 1.0 - self.epsilon / 10.0)
        if not 0 < self.alpha <= 1:
            raise InputError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.t0 < 0:
            raise InputError("t0 must be >= 0")
        if self.x0 is not None:
            object.__setattr__(self, "x0", np.array(self.x0, dtype=np.float64))
        self.record_every  # validates

    @property
    def record_every(self):
        """Snapshot stride, or ``None`` for endpoints only."""
        rec = self.record
        if rec is None:
            return max(1, self.max_steps // 500)
        if rec == "all":
            return 1
        if rec == "endpoints":
            return None
        if isinstance(rec, (int, np.integer)) and not isinstance(rec, bool) and rec >= 1:
            return int(rec)
        raise InputError(f"invalid record option {rec!r}")

    def digest(self):
        h = hashlib.sha1()
        h.update(repr((self.epsilon, self.max_steps, self.alpha, self.t0,
                       self.stop_g_stall, self.record)).encode())
        if self.x0 is not None:
            h.update(self.x0.tobytes())
        return h.hexdigest()[:12]

    @classmethod
    def resume(cls, path, **kwargs):
        """Config that continues ``path`` from its final state and parameter."""
        last = path.records[-1]
        return cls(t0=last.t, x0=last.state, **kwargs)


@dataclass(frozen=True)
class PathRecord:
    step: int
    t: float
    g: float
    loss: float
    state: Optional[np.ndarray] = None
    wall_ns: int = 0
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Path:
    """Ordered stagewise records plus a descriptor of the problem.

    ``status`` is why the run ended: ``max_steps``, ``stationary`` or
    ``g_stall``. ``direction`` is ``"increasing"`` for paths that grow the
    regularizer and ``"regularizing"`` for paths that shrink it.
    """

    records: tuple
    descriptor: dict
    status: str = "max_steps"
    direction: str = "increasing"

    def __post_init__(self):
        steps = [r.step for r in self.records]
        if steps != list(range(len(steps))):
            raise InputError("path records must have contiguous steps from 0")

    def __len__(self):
        return len(self.records)

    @property
    def steps(self):
        return np.array([r.step for r in self.records])

    @property
    def t(self):
        return np.array([r.t for r in self.records])

    @property
    def g(self):
        return np.array([r.g for r in self.records])

    @property
    def loss(self):
        return np.array([r.loss for r in self.records])

    def extra(self, name):
        return np.array([r.extras.get(name, np.nan) for r in self.records])

    def snapshots(self):
        """Records that carry a state."""
        return [r for r in self.records if r.state is not None]

    @property
    def final_state(self):
        return self.records[-1].state

    def to_csv(self, dest=None, timings=True):
        """Write the path as CSV and return the text.

        Columns: ``step,t_static,g_dynamic,loss,wall_ns``, then any extras,
        then ``x1..xp`` (states flattened row-major, blank when not kept).
        ``timings=False`` writes zeros for ``wall_ns`` so output depends
        only on the inputs.
        """
        extras = sorted({k for r in self.records for k in r.extras})
        size = max((r.state.size for r in self.snapshots()), default=0)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "t_static", "g_dynamic", "loss", "wall_ns"] + extras
                   + [f"x{i + 1}" for i in range(size)])
        for r in self.records:
            row = [str(r.step), _fmt(r.t), _fmt(r.g), _fmt(r.loss),
                   str(r.wall_ns if timings else 0)]
            row += [_fmt(r.extras.get(k, np.nan)) for k in extras]
            if r.state is not None:
                row += [_fmt(v) for v in r.state.ravel()]
            else:
                row += [""] * size
            w.writerow(row)
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, src, shape=None, descriptor=None):
        """Read a path written by :meth:`to_csv`. ``src`` is a filename or
        an open text file; states are reshaped to ``shape`` if given."""
        fh = open(src, newline="") if isinstance(src, str) else src
        try:
            rows = list(csv.reader(fh))
        finally:
            if isinstance(src, str):
                fh.close()
        header, body = rows[0], rows[1:]
        xcols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
        extras = [h for i, h in enumerate(header[5:], 5) if i not in xcols]
        records = []
        for row in body:
            state = None
            if xcols and row[xcols[0]] != "":
                state = np.array([float(row[i]) for i in xcols])
                if shape is not None:
                    state = state.reshape(shape)
            ex = {k: float(row[5 + j]) for j, k in enumerate(extras)}
            records.append(PathRecord(int(row[0]), float(row[1]), float(row[2]),
                                      float(row[3]), state, int(row[4]), ex))
        return cls(tuple(records), dict(descriptor or {}))


def _fmt(v):
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# drivers


def _descriptor(loss, reg, cfg, **more):
    d = {"loss": loss.kind, "regularizer": reg.kind, "epsilon": cfg.epsilon,
         "alpha": cfg.alpha, "config_hash": cfg.digest()}
    d.update(more)
    return d


def _initial_state(loss, reg, cfg):
    if cfg.x0 is not None:
        if cfg.x0.shape != tuple(loss.shape):
            raise InputError(f"x0 has shape {cfg.x0.shape}, expected {loss.shape}")
        return cfg.x0.copy()
    if getattr(reg, "null_dim", 0) > 0:
        return init_null_space(loss, reg.qf)
    return loss.zeros()


def _run(loss, reg, cfg, alpha):
    x = _initial_state(loss, reg, cfg)
    if reg.is_norm and reg.value(x) > cfg.t0 + 1e-9:
        raise InputError(f"x0 is infeasible: g(x0) = {reg.value(x)} > t0 = {cfg.t0}")
    every = cfg.record_every
    eps = cfg.epsilon
    t = cfg.t0
    start = time.perf_counter_ns()

    f, grad = loss.value_grad(x)
    if not np.isfinite(f):
        raise NumericalError("loss is not finite at the starting point", step=0)
    gval = reg.value(x) if cfg.track_g else np.nan
    records = [PathRecord(0, t, gval, f, x.copy(), time.perf_counter_ns() - start)]
    status = "max_steps"
    stall = 0
    for k in range(1, cfg.max_steps + 1):
        delta = reg.lmo(grad, eps)
        if not np.any(delta):
            status = "stationary"
            break
        if alpha == 1.0:
            x = x + delta
            t = cfg.t0 + k * eps
        else:
            x = alpha * x + delta
            t = alpha * t + eps
        f, grad = loss.value_grad(x)
        if not (np.isfinite(f) and np.all(np.isfinite(grad))):
            raise NumericalError(f"non-finite loss or gradient at step {k}", step=k)
        g_prev = gval
        gval = reg.value(x) if cfg.track_g else np.nan
        keep = every is not None and k % every == 0
        records.append(PathRecord(k, t, gval, f, x.copy() if keep else None,
                                  time.perf_counter_ns() - start))
        if cfg.stop_g_stall is not None:
            stall = stall + 1 if abs(gval - g_prev) < cfg.stop_g_stall else 0
            if stall >= STALL_RUN:
                status = "g_stall"
                break
    if records[-1].state is None:
        records[-1] = replace(records[-1], state=x.copy())
    return Path(tuple(records), _descriptor(loss, reg, cfg), status)


def run_stagewise(loss, reg, cfg):
    """Pure stagewise: ``x_k = x_{k-1} + reg.lmo(grad f(x_{k-1}), eps)``.

    Stops after ``cfg.max_steps`` updates, when the oracle returns a zero
    step (status ``"stationary"``), or on a g-stall. For a quadratic
    seminorm without ``x0`` the start is :func:`init_null_space`.
    """
    if cfg.alpha != 1.0:
        return run_shrunken(loss, reg, cfg)
    return _run(loss, reg, cfg, 1.0)


def run_shrunken(loss, reg, cfg):
    """Shrunken stagewise: ``x_k = alpha * x_{k-1} + Delta`` with
    ``t_k = alpha * t_{k-1} + eps``. ``alpha == 1`` runs the pure driver."""
    if cfg.alpha == 1.0:
        return _run(loss, reg, cfg, 1.0)
    return _run(loss, reg, cfg, float(cfg.alpha))


def run_sweep(loss, reg, base_cfg, epsilons=None, alphas=None):
    """Run every (epsilon, alpha) combination; returns ``{(eps, alpha): Path}``."""
    epsilons = [base_cfg.epsilon] if epsilons is None else list(epsilons)
    alphas = [base_cfg.alpha] if alphas is None else list(alphas)
    out = {}
    for eps in epsilons:
        for a in alphas:
            cfg = replace(base_cfg, epsilon=eps, alpha=a)
            out[(eps, cfg.alpha)] = run_stagewise(loss, reg, cfg)
    return out


# ---------------------------------------------------------------------------
# seminorm start


def init_null_space(loss, qf):
    """Minimize ``loss`` over ``null(Q)``.

    With ``N`` the null-space basis, solves for ``beta = N theta``: in closed
    form for least squares and the Gaussian signal loss, by damped Newton
    (gradient norm in ``theta`` below 1e-10) for GLMs. Rank-deficient
    reduced problems give the minimum-norm minimizer.
    """
    N = qf.null_basis
    p = qf.p
    if N.shape[1] == 0:
        return np.zeros(p)
    if isinstance(loss, LeastSquares):
        theta = np.linalg.lstsq(loss.X @ N, loss.y, rcond=None)[0]
        return N @ theta
    if isinstance(loss, GaussianSignal):
        theta = np.linalg.lstsq(N, loss.y, rcond=None)[0]
        return N @ theta
    if isinstance(loss, GLM):
        return N @ _newton_reduced(loss, N)
    raise UnsupportedError(f"no null-space initializer for loss {loss.kind!r}")


def _newton_reduced(loss, N, tol=1e-10, max_iter=100):
    Z = loss.X @ N
    theta = np.zeros(N.shape[1])
    f, g = loss.value_grad(N @ theta)
    gt = N.T @ g
    for it in range(max_iter):
        if np.linalg.norm(gt) <= tol:
            return theta
        eta = loss.linear_predictor(N @ theta)
        H = Z.T @ (loss.variance(eta)[:, None] * Z)
        step = np.linalg.lstsq(H, -gt, rcond=None)[0]
        s = 1.0
        while True:
            cand = theta + s * step
            fc, gc = loss.value_grad(N @ cand)
            if fc <= f + 1e-4 * s * (gt @ step) or s < 1e-10:
                break
            s *= 0.5
        theta, f, gt = cand, fc, N.T @ gc
    if np.linalg.norm(gt) <= tol:
        return theta
    raise ConvergenceError("Newton solve over the null space did not converge",
                           residual=float(np.linalg.norm(gt)), iterations=max_iter)


# ---------------------------------------------------------------------------
# diagnostics


class DiagnosticReport(NamedTuple):
    """Outcome of :func:`step_size_diagnostic`.

    ``status`` is ``"clean"`` (monotone throughout), ``"stalled"`` (progress
    stops without oscillating) or ``"alternating"``. ``first_index`` is the
    first step that fails to make progress and ``last_monotone_step`` the
    step before it.
    """

    status: str
    first_index: Optional[int]
    alternating_run: int
    last_monotone_step: Optional[int]
    action: Optional[str]


def _sgn(v, slack):
    return np.where(v > slack, 1, np.where(v < -slack, -1, 0))


def step_size_diagnostic(path, slack=MONOTONE_SLACK):
    """Find where a path stops making monotone progress.

    On an increasing path, step ``k`` fails when ``f`` does not drop by more
    than ``slack`` or ``g`` does not rise by more than ``slack`` (signs are
    reversed for regularizing paths). After the first failure, the
    alternating run counts consecutive steps at which the increment of
    ``f`` or of ``g`` flips sign.
    """
    if len(path) < 3:
        raise InputError("step_size_diagnostic needs a path with at least 3 records")
    f, g = path.loss, path.g
    df, dg = np.diff(f), np.diff(g)
    if path.direction == "regularizing":
        df, dg = -df, -dg
    bad = (df > -slack) | (dg < slack)
    if not np.any(bad):
        return DiagnosticReport("clean", None, 0, None, None)
    k0 = int(np.argmax(bad))          # index into the diff arrays
    sf, sg = _sgn(df, slack), _sgn(dg, slack)
    run = 0
    for j in range(max(k0, 1), len(df)):
        flipped = (sf[j] != 0 and sf[j] == -sf[j - 1]) or \
                  (sg[j] != 0 and sg[j] == -sg[j - 1])
        if not flipped:
            if j > k0:
                break
            continue
        run += 1
    status = "alternating" if run >= 2 else "stalled"
    first = k0 + 1
    return DiagnosticReport(status, first, run, first - 1,
                            "halve epsilon and restart from the last monotone step")


# ---------------------------------------------------------------------------
# interpolation and path quantities


def _keyed_snapshots(path, by):
    snaps = path.snapshots()
    if by == "t":
        keys = np.array([r.t for r in snaps])
    elif by == "g":
        keys = np.array([r.g for r in snaps])
    else:
        raise InputError(f"by must be 't' or 'g', got {by!r}")
    if len(snaps) >= 2:
        d = np.diff(keys)
        if np.all(d <= 0):
            snaps, keys = snaps[::-1], keys[::-1]
        elif not np.all(d >= 0):
            raise InputError(f"path snapshots are not monotone in {by}")
    return snaps, keys


def interpolate_path(path, t, by="t"):
    """State at parameter ``t`` by linear interpolation between the two
    recorded snapshots that bracket it. Recorded values return the stored
    state verbatim."""
    snaps, keys = _keyed_snapshots(path, by)
    if not snaps:
        raise PathRangeError("path has no recorded states")
    if not keys[0] <= t <= keys[-1]:
        raise PathRangeError(f"{by}={t} outside recorded range [{keys[0]}, {keys[-1]}]")
    i = int(np.searchsorted(keys, t, side="left"))
    if keys[i] == t:
        return snaps[i].state.copy()
    lo, hi = snaps[i - 1], snaps[i]
    w = (t - keys[i - 1]) / (keys[i] - keys[i - 1])
    return (1.0 - w) * lo.state + w * hi.state


def interpolate_many(path, ts, by="t"):
    return np.array([interpolate_path(path, t, by) for t in ts])


class LagrangeSequence(NamedTuple):
    step: np.ndarray
    lam: np.ndarray
    t: np.ndarray
    ratio: np.ndarray


def effective_lagrange(path, loss, reg):
    """``lambda_k = g*(grad f(x_k))`` at each snapshot, with ``t_k`` and the
    ratio ``lambda_k / t_k`` (nan where ``t_k = 0``)."""
    snaps = path.snapshots()
    lam = np.array([reg.dual_value(loss.grad(r.state)) for r in snaps])
    t = np.array([r.t for r in snaps])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(t > 0, lam / np.where(t > 0, t, 1.0), np.nan)
    return LagrangeSequence(np.array([r.step for r in snaps]), lam, t, ratio)


class BoundMargin(NamedTuple):
    step: int
    t: float
    bound: float
    excess: float
    margin: float
    oracle_gap: float


def suboptimality_bound(L, t, t0, eps):
    """``L (t^2 - t0^2) + L (t - t0) eps``."""
    return L * (t * t - t0 * t0) + L * (t - t0) * eps


def theorem1_check(path, loss, reg, L, steps=None, gap_tol=1e-10, oracle_values=None):
    """Audit the stagewise suboptimality bound along a path.

    For each audited snapshot ``k``, the excess ``f(x_k) - f(x_hat(t_k))``
    is bounded above using a certified solution ``x~`` with gap ``h``:
    ``f(x_hat) >= f(x~) - h``. The margin is ``bound - excess``; negative
    margins violate the bound. Non-norm regularizers return ``[]``.

    ``oracle_values`` may map step -> (f(x~), h) to skip the oracle solves.
    """
    if not reg.is_norm:
        return []
    from .oracle import solve_at

    t0 = path.records[0].t
    eps = path.descriptor.get("epsilon")
    snaps = path.snapshots()
    if steps is not None:
        wanted = set(steps)
        snaps = [r for r in snaps if r.step in wanted]
    out = []
    warm = None
    for r in snaps:
        if oracle_values is not None and r.step in oracle_values:
            f_opt, gap = oracle_values[r.step]
        elif r.t == 0:
            f_opt, gap = loss.value(loss.zeros()), 0.0
        else:
            sol = solve_at(loss, reg, r.t, gap_tol=gap_tol, x0=warm)
            warm = sol.x
            f_opt, gap = sol.loss_value, max(sol.gap, 0.0)
        bound = suboptimality_bound(L, r.t, t0, eps)
        excess = r.loss - (f_opt - gap)
        out.append(BoundMargin(r.step, r.t, bound, excess, bound - excess, gap))
    return out


def lipschitz_ls(X, reg_kind, partition=None, n_samples=0, seed=0):
    """Lipschitz constant of ``grad f`` for least squares measured in
    ``g`` and its dual: ``max_{u != 0} g*(X^T X u) / g(u)``.

    ``"l1"``: the largest absolute entry of ``X^T X``.
    ``"group_l2"``: the maximum over group pairs ``(i, j)`` of
    ``sigma_max(M[I_i, I_j]) / (w_i w_j)`` with ``M = X^T X``. Since
    ``g*(M u)`` is convex in ``u``, its maximum over ``{g(u) <= 1}`` is
    attained at an extreme point of that ball, a single group block of
    norm ``1 / w_i``, so this value is exact rather than an estimate.
    ``n_samples > 0`` additionally evaluates the ratio at random directions
    and raises if any sample exceeds the returned value.
    """
    X = np.asarray(X, dtype=np.float64)
    M = X.T @ X
    if reg_kind == "l1":
        return float(np.abs(M).max())
    if reg_kind not in ("group_l2", "group"):
        raise UnsupportedError(f"lipschitz_ls supports 'l1' and 'group_l2', not {reg_kind!r}")
    if partition is None:
        raise InputError("group_l2 needs a GroupPartition")
    groups, w = partition.groups, partition.weights
    best = 0.0
    for i, Ii in enumerate(groups):
        for j, Ij in enumerate(groups):
            s = np.linalg.norm(M[np.ix_(Ii, Ij)], ord=2)
            if s > 0:
                best = max(best, s / (w[i] * w[j]))
    if n_samples:
        from .regularizers import GroupNorm
        reg = GroupNorm(partition)
        rng = np.random.default_rng(seed)
        for _ in range(n_samples):
            u = rng.standard_normal(M.shape[0])
            ratio = reg.dual_value(M @ u) / reg.value(u)
            if ratio > best * (1 + 1e-9):
                raise NumericalError("sampled ratio exceeds the block maximum")
    return float(best)
