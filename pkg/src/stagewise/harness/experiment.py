"""Run stagewise, oracle and capped Frank-Wolfe fits on a scenario and
reduce them to error curves and a summary."""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..engine import StagewiseConfig, run_stagewise, step_size_diagnostic
from ..exceptions import StagewiseError
from ..frankwolfe import CertifiedSolution, FWConfig, run_fw
from ..genlasso import PenaltyMatrix, run_genlasso_gaussian
from ..oracle import (
    OracleGrid, genlasso_lambda_max, genlasso_path, ridge_glm_path, solve_grid)
from .scenarios import generate


@dataclass(frozen=True)
class ErrorCurve:
    """Metric along one method's estimates, averaged over repetitions.

    ``index`` is the step (stagewise) or grid position (oracle) each row
    refers to; ``t`` is the matching parameter value, averaged over
    repetitions when it varies (generalized lasso, ridge).
    """

    method: str
    metric_kind: str
    index: np.ndarray
    t: np.ndarray
    metric: np.ndarray
    n_reps: int

    @property
    def argmin(self):
        return int(np.argmin(self.metric))


@dataclass
class Bundle:
    spec: object = None
    paths: dict = field(default_factory=dict)
    oracles: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def summary(self, timings=True):
        """Per-method minimum metric, where it occurs, and wall-clock cost."""
        methods = {}
        for name, c in self.curves.items():
            total, count = self.timings.get(name, (0, 0))
            if not timings:
                total = 0
            i = c.argmin
            methods[name] = {
                "min_metric": float(c.metric[i]),
                "argmin_t": float(c.t[i]),
                "metric_kind": c.metric_kind,
                "total_wall_ns": int(total),
                "per_estimate_wall_ns": int(total // count) if count else 0,
                "n_estimates": int(count),
            }
        out = {
            "scenario": self.spec.scenario if self.spec is not None else None,
            "seed": self.spec.seed if self.spec is not None else None,
            "methods": methods,
            "failures": list(self.failures),
        }
        if self.diagnostics:
            out["diagnostics"] = {k: {"status": d.status, "first_index": d.first_index,
                                      "alternating_run": d.alternating_run}
                                  for k, d in self.diagnostics.items()}
        return out


def method_names(spec):
    names = []
    shrunk = spec.scenario == "shrunken_lasso"
    for eps in spec.epsilons:
        names.append(f"stagewise_eps{eps:g}")
        if shrunk:
            names.append(f"shrunken_eps{eps:g}")
    return names


def _stagewise_runs(problem, spec):
    """Yield ``(name, Path)`` for every configured stagewise variant."""
    for eps, steps in zip(spec.epsilons, spec.steps):
        if isinstance(problem.reg, PenaltyMatrix):
            yield f"stagewise_eps{eps:g}", run_genlasso_gaussian(
                problem.loss.y, problem.reg, eps, steps)
            continue
        alpha = 1.0 if spec.scenario == "shrunken_lasso" else spec.alpha
        cfg = StagewiseConfig(eps, steps, alpha=alpha, record="all")
        yield f"stagewise_eps{eps:g}", run_stagewise(problem.loss, problem.reg, cfg)
        if spec.scenario == "shrunken_lasso":
            cfg = StagewiseConfig(eps, steps, alpha=spec.alpha if spec.alpha != 1.0 else "auto",
                                  record="all")
            yield f"shrunken_eps{eps:g}", run_stagewise(problem.loss, problem.reg, cfg)


def _as_grid(solutions, gap_tol):
    sols = tuple(sorted(solutions, key=lambda s: s.t))
    return OracleGrid(np.array([s.t for s in sols]), sols, gap_tol)


def _oracle(problem, spec, t_max):
    reg = problem.reg
    if isinstance(reg, PenaltyMatrix):
        y = problem.loss.y
        lmax = genlasso_lambda_max(y, reg.D)
        lams = lmax * np.geomspace(1.0, 1e-3, spec.n_t)
        sols = genlasso_path(y, reg.D, lams, gap_tol=spec.gap_tol)
        cert = [CertifiedSolution(s.beta, s.t, s.gap, 0, s.converged,
                                  0.5 * float((y - s.beta) @ (y - s.beta))) for s in sols]
        return _as_grid(cert, spec.gap_tol)
    if not reg.is_norm:
        lams = np.geomspace(1e3, 1e-3, spec.n_t) * problem.loss.X.shape[0] / 100.0
        return _as_grid(ridge_glm_path(problem.loss, reg.qf, lams), 1e-10)
    ts = np.linspace(0.0, t_max, spec.n_t)
    return solve_grid(problem.loss, reg, ts, gap_tol=spec.gap_tol)


def _fw_capped(problem, ts, cap):
    sols = [run_fw(problem.loss, problem.reg, FWConfig(t, 1e-12, cap)) for t in ts]
    return OracleGrid(np.asarray(ts), tuple(sols), 1e-12)


def _run_rep(spec, rep):
    """All methods on one repetition; returns plain per-rep results."""
    out = {"paths": [], "oracles": [], "curves": [], "timings": [],
           "diagnostics": {}, "failures": []}
    problem = generate(spec, rep)
    out["kind"] = problem.metric
    t_max = 0.0
    try:
        for name, path in _stagewise_runs(problem, spec):
            out["paths"].append((name, path))
            out["timings"].append((name, path.records[-1].wall_ns, len(path)))
            snaps = path.snapshots()
            out["curves"].append((name, [r.step for r in snaps], [r.t for r in snaps],
                                  [problem.error(r.state) for r in snaps]))
            if rep == 0 and len(path) >= 3:
                out["diagnostics"][name] = step_size_diagnostic(path)
            if name == f"stagewise_eps{spec.epsilons[0]:g}":
                t_max = max(t_max, float(path.t.max()))
    except StagewiseError as exc:
        out["failures"].append({"method": "stagewise", "rep": rep, "error": str(exc)})

    grid = None
    try:
        start = time.perf_counter_ns()
        grid = _oracle(problem, spec, t_max)
        out["timings"].append(("oracle", time.perf_counter_ns() - start, len(grid.t)))
        out["oracles"].append(("oracle", grid))
        out["curves"].append(("oracle", np.arange(len(grid.t)), grid.t,
                              [problem.error(s.x) for s in grid.solutions]))
        for t in grid.failures:
            out["failures"].append({"method": "oracle", "rep": rep,
                                    "error": f"gap above tolerance at t={t:g}"})
    except StagewiseError as exc:
        out["failures"].append({"method": "oracle", "rep": rep, "error": str(exc)})

    if spec.fw_cap and grid is not None and not isinstance(problem.reg, PenaltyMatrix) \
            and problem.reg.is_norm:
        name = f"fw_cap{spec.fw_cap}"
        try:
            start = time.perf_counter_ns()
            fw = _fw_capped(problem, grid.t, spec.fw_cap)
            out["timings"].append((name, time.perf_counter_ns() - start, len(fw.t)))
            out["oracles"].append((name, fw))
            out["curves"].append((name, np.arange(len(fw.t)), fw.t,
                                  [problem.error(s.x) for s in fw.solutions]))
        except StagewiseError as exc:
            out["failures"].append({"method": name, "rep": rep, "error": str(exc)})
    return out


def run_experiment(spec, workers=None):
    """Run all methods on every repetition of ``spec``.

    Repetitions run concurrently on ``workers`` threads (default: one per
    repetition, capped at the CPU count); results are merged in repetition
    order, so the bundle does not depend on scheduling. Component failures
    are recorded in ``bundle.failures`` and the run continues with the
    remaining components.
    """
    if workers is None:
        workers = min(spec.reps, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _run_rep(spec, r), range(spec.reps)))
    else:
        results = [_run_rep(spec, r) for r in range(spec.reps)]

    bundle = Bundle(spec=spec)
    per_rep = {}  # method -> list of (index, t, metric) arrays
    kind = results[0]["kind"]
    for res in results:
        for name, path in res["paths"]:
            bundle.paths.setdefault(name, []).append(path)
        for name, grid in res["oracles"]:
            bundle.oracles.setdefault(name, []).append(grid)
        for name, ns, count in res["timings"]:
            tot, cnt = bundle.timings.get(name, (0, 0))
            bundle.timings[name] = (tot + ns, cnt + count)
        for name, index, t, metric in res["curves"]:
            per_rep.setdefault(name, []).append(
                (np.asarray(index), np.asarray(t), np.asarray(metric)))
        bundle.diagnostics.update(res["diagnostics"])
        bundle.failures.extend(res["failures"])

    for name, runs in per_rep.items():
        n = min(len(r[0]) for r in runs)
        index = runs[0][0][:n]
        t = np.mean([r[1][:n] for r in runs], axis=0)
        metric = np.mean([r[2][:n] for r in runs], axis=0)
        bundle.curves[name] = ErrorCurve(name, kind, index, t, metric, len(runs))
    return bundle
