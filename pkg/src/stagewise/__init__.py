"""Stagewise algorithms for regularized estimation.

Tiny steps along a linear minimization oracle trace an approximate
regularization path for any smooth loss and norm-like regularizer.
"""

from .engine import (
    Path, PathRecord, StagewiseConfig, effective_lagrange, init_null_space,
    interpolate_path, lipschitz_ls, run_shrunken, run_stagewise,
    step_size_diagnostic, theorem1_check)
from .exceptions import (
    ConvergenceError, InfeasibleError, InputError, NumericalError,
    PathRangeError, StagewiseError, UnboundedDirectionError, UnsupportedError)
from .frankwolfe import (
    CertifiedSolution, FWConfig, duality_gap, fw_path_follow, one_step_fw,
    run_fw)
from .genlasso import PenaltyMatrix, run_genlasso_gaussian
from .losses import (
    GLM, GaussianSignal, LeastSquares, Logistic, MatrixCompletion,
    ObservedMatrix, Poisson)
from .oracle import OracleGrid, solve_at, solve_grid
from .regularizers import (
    GroupNorm, GroupPartition, L1Norm, PowerMethodConfig, QuadraticForm,
    QuadraticRegularizer, TraceNorm)

__all__ = [
    "PenaltyMatrix", "run_genlasso_gaussian", "OracleGrid", "solve_at", "solve_grid",
    "Path", "PathRecord", "StagewiseConfig", "effective_lagrange", "init_null_space",
    "interpolate_path", "lipschitz_ls", "run_shrunken", "run_stagewise",
    "step_size_diagnostic", "theorem1_check", "ConvergenceError", "InfeasibleError",
    "InputError", "NumericalError", "PathRangeError", "StagewiseError",
    "UnboundedDirectionError", "UnsupportedError", "CertifiedSolution", "FWConfig",
    "duality_gap", "fw_path_follow", "one_step_fw", "run_fw", "GLM", "GaussianSignal",
    "LeastSquares", "Logistic", "MatrixCompletion", "ObservedMatrix", "Poisson",
    "GroupNorm", "GroupPartition", "L1Norm", "PowerMethodConfig", "QuadraticForm",
    "QuadraticRegularizer", "TraceNorm",
]

__version__ = "0.1.0"
