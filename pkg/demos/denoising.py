"""Generalized lasso denoising through the dual.

For a Gaussian signal the stagewise update on the dual variable u,
followed by beta = y - D^T u, is the primal update
beta <- beta - eps * D^T sign(D beta). We run both forms on a piecewise
constant chain and compare them, then denoise a two-level image.
"""

import numpy as np

from stagewise import run_genlasso_gaussian
from stagewise.harness.experiment import run_experiment
from stagewise.harness.scenarios import ExperimentSpec, generate


def main():
    spec = ExperimentSpec.default("fused_1d")
    prob = generate(spec, 0)
    y, D = prob.loss.y, prob.reg
    primal = run_genlasso_gaussian(y, D, 0.01, 900, form="primal")
    dual = run_genlasso_gaussian(y, D, 0.01, 900, form="dual")
    diff = max(np.abs(a.state - b.state).max() for a, b in zip(primal.records, dual.records))
    print(f"chain of {y.size}: {len(primal)} frames, largest primal/dual difference {diff:.1e}")
    mse = [np.mean((r.state - prob.truth) ** 2) for r in primal.records]
    k = int(np.argmin(mse))
    print(f"best frame {k}: MSE {mse[k]:.4f} (raw data {mse[0]:.4f})")

    for scenario in ("fused_1d", "image2d"):
        bundle = run_experiment(ExperimentSpec.default(scenario))
        for name, curve in bundle.curves.items():
            print(f"{scenario:9s} {name:20s} best mean MSE {curve.metric.min():.4f}")


if __name__ == "__main__":
    main()
