"""Frank-Wolfe path following against stagewise.

Path following places breakpoints so that every t between them has an
approximate solution within gamma of optimal; smaller gamma needs more
breakpoints. The one-step Frank-Wolfe path, by contrast, jumps to a single
vertex each time, while stagewise accumulates small steps.
"""

import numpy as np

from stagewise import (GroupNorm, GroupPartition, L1Norm, LeastSquares, StagewiseConfig,
                       fw_path_follow, run_stagewise, solve_at)
from stagewise.frankwolfe import one_step_fw_path


def main():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((20, 9))
    loss = LeastSquares(X, X @ np.r_[rng.standard_normal(3), np.zeros(6)]
                        + 0.5 * rng.standard_normal(20))
    reg = GroupNorm(GroupPartition.equal_sized(9, 3))
    for gamma in (2.0, 1.0, 0.5):
        fp = fw_path_follow(loss, reg, gamma, 2.0, t_max=3.0)
        worst = max(loss.value(fp.evaluate(t)) - solve_at(loss, reg, t).loss_value
                    for t in np.linspace(0.1, 2.9, 8))
        print(f"gamma={gamma}: {len(fp.breakpoints):3d} breakpoints, worst excess {worst:.3f}")

    ts = 0.05 * np.arange(1, 121)
    one = one_step_fw_path(loss, L1Norm(), ts)
    sw = run_stagewise(loss, L1Norm(), StagewiseConfig(0.05, 120, record="all"))
    print(f"nonzeros at t={ts[-1]:.0f}: one-step {np.count_nonzero(one[-1])}, "
          f"stagewise {np.count_nonzero(sw.final_state)}")


if __name__ == "__main__":
    main()
