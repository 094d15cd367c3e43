"""Frank-Wolfe at a fixed constraint level, its duality gap, and path
following on top of it.

For ``min f(x) s.t. g(x) <= t`` with ``g`` a norm, the gap

    h_t(x) = <grad f(x), x> + t * g*(grad f(x)) = <grad f(x), x - s>,

where ``s`` is the oracle output at level ``t``, bounds ``f(x) - f(x_hat(t))``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasibleError, InputError, UnsupportedError

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class FWConfig:
    """``t``: constraint level; iterations stop at ``gap <= gap_tol`` or
    after ``max_iter`` steps. The step rule is ``gamma_k = 2 / (k + 1)``."""

    t: float
    gap_tol: float = 1e-8
    max_iter: int = 50_000

    def __post_init__(self):
        if not self.t >= 0:
            raise InputError(f"t must be >= 0, got {self.t}")
        if not self.gap_tol > 0:
            raise InputError(f"gap_tol must be positive, got {self.gap_tol}")
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")


@dataclass(frozen=True)
class CertifiedSolution:
    x: np.ndarray
    t: float
    gap: float
    iterations: int
    converged: bool
    loss_value: float


def _require_norm(reg):
    if not reg.is_norm:
        raise UnsupportedError(
            f"{reg.kind} regularizer is not a norm; constrained solves are not supported")


def _check_feasible(reg, x, t):
    gx = reg.value(x)
    if gx > t + FEAS_TOL * max(1.0, t):
        raise InfeasibleError(f"g(x) = {gx} exceeds t = {t}")


def duality_gap(x, t, loss, reg):
    """``h_t(x) = <grad f(x), x> + t * g*(grad f(x))`` for feasible ``x``."""
    _require_norm(reg)
    x = np.asarray(x, dtype=np.float64)
    _check_feasible(reg, x, t)
    grad = loss.grad(x)
    return float(np.vdot(grad, x) + t * reg.dual_value(grad))


def fw_iterates(loss, reg, t, x0=None):
    """Yield ``(k, x_k, f(x_k), gap_k)`` for ``k = 0, 1, ...`` indefinitely.

    ``x_k = (1 - gamma) x_{k-1} + gamma s_{k-1}`` with ``gamma = 2/(k+1)``, so
    ``x_1`` is the first oracle vertex whatever ``x0`` was.
    """
    _require_norm(reg)
    x = loss.zeros() if x0 is None else np.array(x0, dtype=np.float64)
    _check_feasible(reg, x, t)
    k = 0
    while True:
        f, grad = loss.value_grad(x)
        s = reg.lmo(grad, t)
        gap = float(np.vdot(grad, x - s))
        yield k, x, f, gap
        k += 1
        gamma = 2.0 / (k + 1)
        x = (1.0 - gamma) * x + gamma * s


def run_fw(loss, reg, cfg, x0=None):
    """Frank-Wolfe at level ``cfg.t``; returns the iterate with the smallest
    gap seen. Hitting ``max_iter`` is reported through ``converged=False``."""
    _require_norm(reg)
    if cfg.t == 0:
        x = loss.zeros()
        return CertifiedSolution(x, 0.0, 0.0, 0, True, loss.value(x))
    best = None
    for k, x, f, gap in fw_iterates(loss, reg, cfg.t, x0):
        if best is None or gap < best[2]:
            best = (x, f, gap)
        if gap <= cfg.gap_tol or k >= cfg.max_iter:
            break
    x, f, gap = best
    return CertifiedSolution(x, cfg.t, gap, k, gap <= cfg.gap_tol, f)


@dataclass(frozen=True)
class FWPath:
    """Piecewise-constant certified path: the solution at ``breakpoints[i]``
    is used on ``[breakpoints[i], breakpoints[i+1])``."""

    breakpoints: np.ndarray
    solutions: tuple
    increments: np.ndarray
    gamma: float
    m: float
    status: str

    def index(self, t):
        bp = self.breakpoints
        if t < bp[0]:
            raise InputError(f"t={t} precedes the first breakpoint {bp[0]}")
        return int(np.searchsorted(bp, t, side="right") - 1)

    def evaluate(self, t):
        return self.solutions[self.index(t)].x


def fw_path_follow(loss, reg, gamma, m, t0=0.0, t_max=None, max_iter=50_000,
                   max_breakpoints=100_000):
    """Path of solutions each accurate to within ``gamma`` in criterion.

    Each breakpoint is solved to gap ``gamma / m`` (warm-started from the
    previous one) and the next is placed at
    ``t_k = t_{k-1} + (1 - 1/m) * gamma / g*(grad f(x(t_{k-1})))``.
    Stops once ``t_k >= t_max`` (the last piece then covers ``t_max``) or
    the gradient vanishes in dual norm (status ``"complete"``). ``t_max``
    must be finite: near the unconstrained optimum the dual norm shrinks
    without reaching zero, so breakpoints never run out on their own.
    """
    if not gamma > 0 or not m > 1:
        raise InputError("need gamma > 0 and m > 1")
    if t_max is None or not np.isfinite(t_max) or t_max < t0:
        raise InputError(f"t_max must be finite and >= t0, got {t_max}")
    tol = gamma / m
    sol = run_fw(loss, reg, FWConfig(t0, tol, max_iter))
    bps, sols, incs = [t0], [sol], []
    status = "t_max"
    t = t0
    while t < t_max:
        d = reg.dual_value(loss.grad(sol.x))
        if d == 0:
            status = "complete"
            break
        if len(bps) >= max_breakpoints:
            status = "max_breakpoints"
            break
        inc = (1.0 - 1.0 / m) * gamma / d
        t = t + inc
        sol = run_fw(loss, reg, FWConfig(t, tol, max_iter), x0=sol.x)
        bps.append(t)
        sols.append(sol)
        incs.append(inc)
    return FWPath(np.array(bps), tuple(sols), np.array(incs), gamma, m, status)


def one_step_fw(loss, reg, x_prev, t_next):
    """A single Frank-Wolfe step with ``gamma = 1`` at ``t_next``: the oracle
    vertex for ``grad f(x_prev)``, which replaces ``x_prev`` entirely."""
    _require_norm(reg)
    x_prev = np.asarray(x_prev, dtype=np.float64)
    _check_feasible(reg, x_prev, t_next)
    return reg.lmo(loss.grad(x_prev), t_next)


def one_step_fw_path(loss, reg, ts):
    """Chain :func:`one_step_fw` over increasing ``ts`` starting from zero."""
    x = loss.zeros()
    out = []
    for t in ts:
        x = one_step_fw(loss, reg, x, t)
        out.append(x)
    return out
