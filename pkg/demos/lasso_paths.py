"""Stagewise paths for the lasso.

With a monotone design (lower-triangular ones) the stagewise path converges
to the exact constrained lasso path as the step shrinks. We measure the
sup-norm distance to a certified oracle at 20 values of t for three step
sizes, then check the suboptimality bound along a random instance.
"""

import numpy as np

from stagewise import (L1Norm, LeastSquares, StagewiseConfig, lipschitz_ls, run_stagewise,
                       solve_grid, theorem1_check)
from stagewise.engine import interpolate_many
from stagewise.harness.scenarios import ExperimentSpec, generate


def main():
    loss = generate(ExperimentSpec.default("monotone_lasso"), 0).loss
    ols = np.linalg.solve(loss.X, loss.y)
    ts = np.linspace(0, 0.9 * np.abs(ols).sum(), 21)[1:]
    grid = solve_grid(loss, L1Norm(), ts, gap_tol=1e-8)
    print(f"oracle: 20 levels up to t={ts[-1]:.3f}, largest gap {grid.gaps.max():.1e}")

    for eps in (4e-4, 2e-4, 1e-4):
        steps = int(np.ceil(ts[-1] / eps)) + 1
        path = run_stagewise(loss, L1Norm(), StagewiseConfig(eps, steps, record="all"))
        dist = np.abs(interpolate_many(path, ts) - grid.states).max()
        print(f"eps={eps:.0e}  steps={steps:6d}  sup distance to oracle {dist:.2e}")

    # the bound f(x_k) - f*(t_k) <= L * ... should hold at every step
    rng = np.random.default_rng(0)
    X = rng.standard_normal((12, 8))
    loss = LeastSquares(X, X @ rng.standard_normal(8) + rng.standard_normal(12))
    path = run_stagewise(loss, L1Norm(), StagewiseConfig(0.05, 60, record="all"))
    margins = theorem1_check(path, loss, L1Norm(), lipschitz_ls(X, "l1"))
    worst = min((m for m in margins if m.step > 0), key=lambda m: m.margin)
    print(f"random instance: smallest bound margin {worst.margin:.3g} at step {worst.step}")


if __name__ == "__main__":
    main()
