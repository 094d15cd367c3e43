"""Command-line entry point.

Subcommands:

``run``       full experiment (stagewise, oracle, optional capped FW), written with emit
``oracle``    certified oracle grid for one generated instance, as CSV
``compare``   full experiment, printed as a table of minimum errors
``diagnose``  step-size diagnostic for one stagewise run
``fw-path``   Frank-Wolfe path following on one generated instance, as CSV

Exit codes: 0 success, 2 invalid spec, 3 numeric failure, 4 IO failure.
"""

import argparse
import io
import json
import sys

import numpy as np

from ..engine import StagewiseConfig, run_stagewise, step_size_diagnostic
from ..exceptions import (
    ConvergenceError, InputError, NumericalError, UnboundedDirectionError, UnsupportedError)
from ..frankwolfe import fw_path_follow
from ..genlasso import PenaltyMatrix, run_genlasso_gaussian
from ..oracle import solve_grid
from .experiment import run_experiment
from .io import emit
from .scenarios import SCENARIOS, ExperimentSpec, generate

EXIT_OK, EXIT_SPEC, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _alpha(text):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be a number or 'auto', got {text!r}")


def parse_t_grid(text):
    """``start:stop:num`` (inclusive linspace) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InputError(f"t grid {text!r} is not start:stop:num")
        return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
    return np.array(_floats(text))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stagewise", description="Stagewise regularization paths and their oracles.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, choices=SCENARIOS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--reps", type=int, default=None, help="repetitions (default per scenario)")
        p.add_argument("--epsilon", type=_floats, default=None,
                       help="step size(s), comma-separated")
        p.add_argument("--steps", type=_ints, default=None,
                       help="step count(s), one per epsilon or a single shared value")
        p.add_argument("--alpha", type=_alpha, default=None,
                       help="shrinkage factor in (0, 1] or 'auto'")
        p.add_argument("--gap-tol", type=float, default=None)
        p.add_argument("--out", default=None, help="output directory or file")

    p = sub.add_parser("run", help="run an experiment and write CSV/JSON output")
    common(p)
    p.add_argument("--t-grid", default=None, help="size of the oracle grid (an integer)")
    p.add_argument("--fw-cap", type=int, default=None)
    p.add_argument("--no-timings", action="store_true",
                   help="write zero for wall-clock fields (byte-reproducible output)")

    p = sub.add_parser("oracle", help="certified solutions on a t grid")
    common(p)
    p.add_argument("--t-grid", required=True, help="start:stop:num or comma list")

    p = sub.add_parser("compare", help="print minimum error per method")
    common(p)
    p.add_argument("--t-grid", default=None, help="size of the oracle grid (an integer)")
    p.add_argument("--fw-cap", type=int, default=None)

    p = sub.add_parser("diagnose", help="step-size diagnostic for a stagewise run")
    common(p)

    p = sub.add_parser("fw-path", help="Frank-Wolfe path following")
    common(p)
    p.add_argument("--gamma", type=float, required=True, help="criterion accuracy")
    p.add_argument("--m", type=float, default=2.0, help="gap split factor (> 1)")
    p.add_argument("--t-max", type=float, required=True)
    return parser


def spec_from_args(args):
    overrides = {"seed": args.seed, "reps": args.reps, "epsilons": args.epsilon,
                 "steps": args.steps, "alpha": args.alpha, "gap_tol": args.gap_tol,
                 "fw_cap": getattr(args, "fw_cap", None)}
    grid = getattr(args, "t_grid", None)
    if grid is not None and args.command in ("run", "compare"):
        try:
            overrides["n_t"] = int(grid)
        except ValueError:
            raise InputError(f"--t-grid for {args.command} is the oracle grid size, got {grid!r}")
    if args.epsilon is not None and args.steps is None:
        base = ExperimentSpec.default(args.scenario)
        overrides["steps"] = (base.steps[0],)
    return ExperimentSpec.default(args.scenario, **overrides)


def _output(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror or exc}") from exc


def cmd_run(args):
    spec = spec_from_args(args)
    bundle = run_experiment(spec)
    files = emit(bundle, args.out or "results", timings=not args.no_timings)
    for f in files:
        print(f)
    return EXIT_NUMERIC if bundle.failures and not bundle.curves else EXIT_OK


def cmd_oracle(args):
    spec = spec_from_args(args)
    problem = generate(spec, 0)
    if isinstance(problem.reg, PenaltyMatrix) or not problem.reg.is_norm:
        raise UnsupportedError(
            f"the oracle subcommand needs a norm-constrained scenario, not {spec.scenario}")
    ts = parse_t_grid(args.t_grid)
    grid = solve_grid(problem.loss, problem.reg, ts, gap_tol=spec.gap_tol)
    _output(grid.to_csv(), args.out)
    if grid.failures:
        print(f"gap above tolerance at t = {grid.failures}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_compare(args):
    spec = spec_from_args(args)
    bundle = run_experiment(spec)
    summary = bundle.summary()
    buf = io.StringIO()
    buf.write(f"{spec.scenario} seed={spec.seed} reps={spec.reps}\n")
    buf.write(f"{'method':<24}{'min_metric':>14}{'argmin_t':>12}{'per_est_ms':>12}\n")
    for name, m in summary["methods"].items():
        buf.write(f"{name:<24}{m['min_metric']:>14.6g}{m['argmin_t']:>12.4g}"
                  f"{m['per_estimate_wall_ns'] / 1e6:>12.3f}\n")
    for d in summary.get("diagnostics", {}).items():
        buf.write(f"diagnostic {d[0]}: {d[1]['status']}\n")
    for f in summary["failures"]:
        buf.write(f"failure: {f}\n")
    _output(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_diagnose(args):
    spec = spec_from_args(args)
    problem = generate(spec, 0)
    eps, steps = spec.epsilons[0], spec.steps[0]
    if isinstance(problem.reg, PenaltyMatrix):
        path = run_genlasso_gaussian(problem.loss.y, problem.reg, eps, steps)
    else:
        cfg = StagewiseConfig(eps, steps, alpha=spec.alpha, record="all")
        path = run_stagewise(problem.loss, problem.reg, cfg)
    rep = step_size_diagnostic(path)
    out = {"scenario": spec.scenario, "epsilon": eps, "steps": len(path) - 1,
           "path_status": path.status, "status": rep.status,
           "first_index": rep.first_index, "alternating_run": rep.alternating_run,
           "last_monotone_step": rep.last_monotone_step, "action": rep.action}
    _output(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_fw_path(args):
    spec = spec_from_args(args)
    problem = generate(spec, 0)
    if isinstance(problem.reg, PenaltyMatrix) or not problem.reg.is_norm:
        raise UnsupportedError(
            f"fw-path needs a norm-constrained scenario, not {spec.scenario}")
    fp = fw_path_follow(problem.loss, problem.reg, args.gamma, args.m, t_max=args.t_max)
    buf = io.StringIO()
    size = fp.solutions[0].x.size
    buf.write(",".join(["t", "gap", "iterations", "loss"]
                       + [f"x{i + 1}" for i in range(size)]) + "\n")
    for t, s in zip(fp.breakpoints, fp.solutions):
        buf.write(",".join([format(t, ".17g"), format(s.gap, ".17g"), str(s.iterations),
                            format(s.loss_value, ".17g")]
                           + [format(v, ".17g") for v in s.x.ravel()]) + "\n")
    _output(buf.getvalue(), args.out)
    print(f"{len(fp.breakpoints)} breakpoints, status {fp.status}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "oracle": cmd_oracle, "compare": cmd_compare,
            "diagnose": cmd_diagnose, "fw-path": cmd_fw_path}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SPEC if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (InputError, UnsupportedError) as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (NumericalError, ConvergenceError, UnboundedDirectionError,
            FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
