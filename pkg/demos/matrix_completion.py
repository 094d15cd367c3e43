"""Trace-norm stagewise for matrix completion.

Each step adds a rank-one matrix built from the top singular pair of the
gradient. Compare the best MSE along the path for two step sizes with the
nuclear-norm-constrained oracle.
"""

from stagewise.harness.experiment import run_experiment
from stagewise.harness.scenarios import ExperimentSpec


def main():
    spec = ExperimentSpec.default("matcomp")
    bundle = run_experiment(spec)
    oracle = bundle.curves["oracle"].metric.min()
    for name, curve in bundle.curves.items():
        best = curve.metric.min()
        print(f"{name:20s} best MSE {best:.4f} ({100 * (best / oracle - 1):+.1f}% vs oracle)")


if __name__ == "__main__":
    main()
