"""Shrunken stagewise and seminorm regularizers.

Shrinking the iterate by alpha before each step pulls the path toward the
penalized lasso path; the implied lambda_k / t_k decays along it. The
second half runs stagewise with a P-spline penalty: it starts from the
least-squares line (the penalty's null space) and every step lies in the
penalty's row space.
"""

import numpy as np

from stagewise import (L1Norm, LeastSquares, QuadraticForm, QuadraticRegularizer,
                       StagewiseConfig, effective_lagrange, init_null_space, run_stagewise,
                       solve_grid)
from stagewise.engine import interpolate_many
from stagewise.harness.scenarios import ExperimentSpec, generate


def shrunken():
    spec = ExperimentSpec.default("shrunken_lasso")
    loss = generate(spec, 0).loss
    eps, steps = spec.epsilons[0], spec.steps[0]
    pure = run_stagewise(loss, L1Norm(), StagewiseConfig(eps, steps, record="all"))
    shrunk = run_stagewise(loss, L1Norm(), StagewiseConfig(eps, steps, alpha="auto",
                                                           record="all"))
    ts = np.linspace(0, min(pure.t[-1], shrunk.t[-1]), 21)[1:]
    oracle = solve_grid(loss, L1Norm(), ts, gap_tol=1e-8).states
    for name, path in (("pure", pure), ("shrunken", shrunk)):
        d = np.abs(interpolate_many(path, ts) - oracle).max()
        print(f"{name:8s} sup distance to oracle on t <= {ts[-1]:.2f}: {d:.3f}")
    ratio = effective_lagrange(shrunk, loss, L1Norm()).ratio
    ratio = ratio[np.isfinite(ratio)]
    print("lambda/t along the shrunken path:",
          " ".join(f"{r:.3g}" for r in ratio[:: len(ratio) // 6]))


def splines():
    n = 40
    s = np.linspace(0, 1, n)
    y = np.sin(2 * np.pi * s) + np.random.default_rng(0).standard_normal(n)
    qf = QuadraticForm.difference(n, 2)
    loss = LeastSquares(np.eye(n), y)
    start = init_null_space(loss, qf)
    print(f"start equals the least-squares line: "
          f"{np.allclose(start, np.polyval(np.polyfit(s, y, 1), s))}")
    path = run_stagewise(loss, QuadraticRegularizer(qf),
                         StagewiseConfig(0.005 ** 2, 300, record="all"))
    print(f"loss {path.loss[0]:.3f} -> {path.loss[-1]:.3f} over {len(path) - 1} steps, "
          f"penalty {path.g[-1]:.4f}")


if __name__ == "__main__":
    shrunken()
    splines()
