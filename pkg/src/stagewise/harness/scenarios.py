"""Synthetic problem generators at desk scale.

Every scenario draws its design, its ground truth and its noise from
separate streams, ``SeedSequence([seed, component, rep])`` with component
0 = design, 1 = truth, 2 = noise, 3 = test inputs, 4 = test labels.
Repetitions redraw only the noise and test labels; design, truth and test
inputs stay fixed.
"""

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..exceptions import InputError
from ..genlasso import PenaltyMatrix
from ..losses import GaussianSignal, LeastSquares, Logistic, MatrixCompletion, ObservedMatrix
from ..regularizers import (
    GroupNorm, GroupPartition, L1Norm, PowerMethodConfig, QuadraticForm, QuadraticRegularizer,
    TraceNorm)

SCENARIOS = ("group_uncorr", "group_corr", "matcomp", "image2d",
             "ridge_logistic_uncorr", "ridge_logistic_corr", "monotone_lasso",
             "shrunken_lasso", "fused_1d")

DESIGN, TRUTH, NOISE, TEST, TEST_LABELS = range(5)


def stream(seed, component, rep=0):
    """Independent generator for one component of one repetition."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), component, rep]))


_DEFAULTS = {
    "group_uncorr": dict(n=50, p=100, G=10, active=2, sigma=2.0, reps=5,
                         epsilons=(0.05, 2.5), steps=(200, 60), n_t=40),
    "group_corr": dict(n=50, p=100, G=10, active=2, sigma=3.0, rho=0.85, reps=5,
                       epsilons=(0.05, 2.5), steps=(300, 60), n_t=40),
    "matcomp": dict(n=30, p=30, rank=3, sigma=float(np.sqrt(1.2)), missing=0.4, reps=3,
                    epsilons=(0.5, 2.5), steps=(300, 60), n_t=40),
    "image2d": dict(h=20, w=20, sigma=1.0, reps=3, epsilons=(0.005, 0.05),
                    steps=(600, 60), n_t=40),
    "fused_1d": dict(n=20, segments=5, sigma=1.0, reps=3, epsilons=(0.01, 0.1),
                     steps=(900, 90), n_t=40),
    "ridge_logistic_uncorr": dict(n=200, p=20, active=5, reps=3,
                                  epsilons=(0.0025, 0.25), steps=(200, 30), n_t=30),
    "ridge_logistic_corr": dict(n=200, p=20, active=5, rho=0.8, reps=3,
                                epsilons=(2.5e-5, 2.5e-3), steps=(2000, 1000), n_t=30),
    "monotone_lasso": dict(n=10, segments=5, sigma=1.0, reps=1,
                           epsilons=(1e-3,), steps=(5000,), n_t=20),
    "shrunken_lasso": dict(n=20, p=10, rho=0.8, sigma=1.0, reps=1,
                           epsilons=(1e-3,), steps=(8000,), alpha="auto", n_t=20),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """Scenario name, scale parameters, seed and solver settings.

    ``epsilons``/``steps`` are paired: one stagewise run per entry. ``n_t``
    is the size of the oracle grid and ``gap_tol`` its target gap.
    ``fw_cap`` optionally adds Frank-Wolfe capped at that many iterations.
    """

    scenario: str
    seed: int = 0
    reps: int = 1
    n: int = 50
    p: int = 100
    G: int = 10
    active: int = 2
    rank: int = 3
    sigma: float = 1.0
    rho: float = 0.0
    missing: float = 0.4
    h: int = 20
    w: int = 20
    segments: int = 5
    epsilons: tuple = (0.05,)
    steps: tuple = (300,)
    alpha: object = 1.0
    n_t: int = 40
    gap_tol: float = 1e-8
    fw_cap: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InputError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        for name in ("reps", "n", "p", "G", "active", "rank", "h", "w", "segments", "n_t"):
            if getattr(self, name) <= 0:
                raise InputError(f"{name} must be positive")
        if not self.sigma > 0:
            raise InputError("sigma must be positive")
        if not 0 <= self.rho < 1:
            raise InputError("rho must lie in [0, 1)")
        if not 0 < self.missing < 1:
            raise InputError("missing fraction must lie in (0, 1)")
        eps = tuple(float(e) for e in np.atleast_1d(self.epsilons))
        steps = tuple(int(s) for s in np.atleast_1d(self.steps))
        if len(steps) == 1 and len(eps) > 1:
            steps = steps * len(eps)
        if len(steps) != len(eps) or any(e <= 0 for e in eps) or any(s <= 0 for s in steps):
            raise InputError("need one positive step count per positive epsilon")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "steps", steps)
        if self.scenario.startswith("group") and self.p % self.G:
            raise InputError("p must be divisible by G")
        if self.scenario.startswith("group") and self.active > self.G:
            raise InputError("more active groups than groups")

    @classmethod
    def default(cls, scenario, **overrides):
        if scenario not in _DEFAULTS:
            raise InputError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
        params = dict(_DEFAULTS[scenario])
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(scenario=scenario, **params)

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        d = asdict(self)
        d["epsilons"] = list(self.epsilons)
        d["steps"] = list(self.steps)
        return d


@dataclass
class Problem:
    """One generated instance: loss and regularizer plus the truth.

    ``metric`` names the error measure (``mse_to_truth`` or
    ``test_misclass``); ``data`` holds what it needs (design, test set).
    """

    scenario: str
    loss: object
    reg: object
    truth: np.ndarray
    metric: str
    data: dict = field(default_factory=dict)

    def error(self, x):
        d = self.data
        if self.metric == "test_misclass":
            pred = (d["X_test"] @ x > 0).astype(float)
            return float(np.mean(pred != d["y_test"]))
        if "X" in d:
            r = d["X"] @ (x - self.truth)
            return float(r @ r) / d["X"].shape[0]
        diff = np.asarray(x) - self.truth
        return float(np.sum(diff * diff)) / diff.size


def equicorrelated(p, rho):
    C = np.full((p, p), rho)
    np.fill_diagonal(C, 1.0)
    return np.linalg.cholesky(C)


def block_correlated(p, G, rho):
    """Cholesky factor of a covariance with unit variances where predictor
    ``k`` of each group is correlated ``rho`` with predictor ``k`` of every
    other group (one partner per group)."""
    size = p // G
    C = np.eye(p)
    for k in range(size):
        idx = np.arange(G) * size + k
        C[np.ix_(idx, idx)] = rho
        C[idx, idx] = 1.0
    return np.linalg.cholesky(C)


def two_level_image(h, w, high=3.0):
    """Zero background with a centred rectangle at level ``high``."""
    img = np.zeros((h, w))
    img[h // 4: h - h // 4, w // 4: w - w // 4] = high
    return img


def piecewise_constant(n, segments, rng, low=1.0, high=10.0):
    """Signal with ``segments`` equal-length pieces at uniform levels."""
    levels = rng.uniform(low, high, segments)
    bounds = np.linspace(0, n, segments + 1).round().astype(int)
    out = np.empty(n)
    for j in range(segments):
        out[bounds[j]:bounds[j + 1]] = levels[j]
    return out


def generate(spec, rep=0):
    """Problem instance for ``spec``; deterministic in ``(spec, rep)``."""
    s = spec.scenario
    seed = spec.seed
    rd, rt, rn = stream(seed, DESIGN), stream(seed, TRUTH), stream(seed, NOISE, rep)

    if s in ("group_uncorr", "group_corr"):
        Z = rd.standard_normal((spec.n, spec.p))
        X = Z if s == "group_uncorr" else Z @ block_correlated(spec.p, spec.G, spec.rho).T
        part = GroupPartition.equal_sized(spec.p, spec.G)
        beta = np.zeros(spec.p)
        for j in rt.choice(spec.G, spec.active, replace=False):
            idx = part.groups[j]
            beta[idx] = rt.standard_normal(idx.size)
        y = X @ beta + spec.sigma * rn.standard_normal(spec.n)
        return Problem(s, LeastSquares(X, y), GroupNorm(part), beta, "mse_to_truth",
                       {"X": X, "y": y})

    if s == "matcomp":
        m, n = spec.n, spec.p
        U = rt.standard_normal((m, spec.rank))
        V = U if m == n else rt.standard_normal((n, spec.rank))
        B = U @ V.T
        mask = rd.random((m, n)) >= spec.missing
        Y = B + spec.sigma * rn.standard_normal((m, n))
        obs = ObservedMatrix.from_dense(Y, mask)
        return Problem(s, MatrixCompletion(obs), TraceNorm(PowerMethodConfig(dense_below=64)), B, "mse_to_truth",
                       {"mask": mask})

    if s in ("image2d", "fused_1d"):
        if s == "image2d":
            truth = two_level_image(spec.h, spec.w).ravel()
            D = PenaltyMatrix.grid2d(spec.h, spec.w)
        else:
            truth = piecewise_constant(spec.n, spec.segments, rt)
            D = PenaltyMatrix.chain(spec.n)
        y = truth + spec.sigma * rn.standard_normal(truth.size)
        return Problem(s, GaussianSignal(y), D, truth, "mse_to_truth", {"y": y})

    if s in ("ridge_logistic_uncorr", "ridge_logistic_corr"):
        L = np.eye(spec.p) if s.endswith("uncorr") else equicorrelated(spec.p, spec.rho)
        X = rd.standard_normal((spec.n, spec.p)) @ L.T
        beta = np.zeros(spec.p)
        beta[rt.choice(spec.p, spec.active, replace=False)] = rt.standard_normal(spec.active)
        y = (rn.random(spec.n) < 1.0 / (1.0 + np.exp(-(X @ beta)))).astype(float)
        rtest = stream(seed, TEST_LABELS, rep)
        X_test = stream(seed, TEST).standard_normal((4 * spec.n, spec.p)) @ L.T
        y_test = (rtest.random(4 * spec.n) < 1.0 / (1.0 + np.exp(-(X_test @ beta)))).astype(float)
        reg = QuadraticRegularizer(QuadraticForm.dense(np.eye(spec.p)))
        return Problem(s, Logistic(X, y), reg, beta, "test_misclass",
                       {"X_test": X_test, "y_test": y_test})

    if s == "monotone_lasso":
        X = np.tril(np.ones((spec.n, spec.n)))
        mean = piecewise_constant(spec.n, spec.segments, rt)
        # in this design beta holds the jumps of the mean
        beta = np.linalg.solve(X, mean)
        y = mean + spec.sigma * rn.standard_normal(spec.n)
        return Problem(s, LeastSquares(X, y), L1Norm(), beta, "mse_to_truth",
                       {"X": X, "y": y})

    # shrunken_lasso
    X = rd.standard_normal((spec.n, spec.p)) @ equicorrelated(spec.p, spec.rho).T
    beta = rt.standard_normal(spec.p)
    y = X @ beta + spec.sigma * rn.standard_normal(spec.n)
    return Problem(s, LeastSquares(X, y), L1Norm(), beta, "mse_to_truth", {"X": X, "y": y})
