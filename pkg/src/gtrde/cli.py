"""Command-line front end.

Exit codes: 0 success, 1 invalid input or failed verification, 2 solver did
not converge, 3 I/O error. Diagnostics go to stderr; results go to files.
"""

import argparse
import json
import sys

import numpy as np

from .errors import (
    AssumptionViolation,
    GTRDEError,
    InnerFailure,
    InvalidProblem,
    MonotonicityViolation,
    NoConvergence,
    SignConditionLost,
    UnstableSolution,
)
from .experiment import ExperimentSpec, generate_benchmark_instance, parse_dims, run_campaign
from .iteration import IterationConfig, load_solution, residual_field, save_solution, solve
from .kernel import sign_condition_check
from .linalg import min_eigenvalue, psd_floor
from .problem import load_problem, save_problem
from .solver import SolverConfig
from .stability import esms_check

EXIT_OK, EXIT_INVALID, EXIT_NO_CONVERGENCE, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _say(msg):
    print(msg, file=sys.stderr)


def build_parser():
    p = _Parser(prog="gtrde", description="Regime-switching stochastic game Riccati solver.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("--problem", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tol", type=float, default=1e-12, help="outer tolerance (default 1e-12)")
    s.add_argument("--grid", type=int, default=64, help="samples per period (default 64)")

    v = sub.add_parser("verify", help="check a solution against its problem")
    v.add_argument("--problem", required=True)
    v.add_argument("--solution", required=True)
    v.add_argument("--tol", type=float, default=1e-6, help="residual bound (default 1e-6)")

    g = sub.add_parser("generate", help="write a random benchmark instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--trial", type=int, default=0)
    g.add_argument("--out", required=True)

    e = sub.add_parser("experiment", help="run a randomized campaign")
    e.add_argument("--dims", required=True, help="dimension range A..B")
    e.add_argument("--trials", type=int, required=True)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--timing", action="store_true", help="fill the ms column")
    return p


def _cmd_solve(args):
    P = load_problem(args.problem)
    X, rep = solve(P, IterationConfig(outer_tol=args.tol), SolverConfig(grid_points=args.grid))
    save_solution(args.out, X, rep)
    _say(
        f"converged in {rep.iterations} steps, delta {rep.final_delta:.3g}, "
        f"residual {rep.final_residual:.3g}, {rep.stability.kind} {rep.stability.value:.6g}"
    )
    return EXIT_OK


def _verify(P, X, tol):
    """Yield ``(invariant, passed, detail)`` for a candidate solution."""
    if (X.N, X.n) != (P.N, P.n):
        yield "dimensions", False, f"solution is {X.N} modes of {X.n}x{X.n}, problem needs {P.N} of {P.n}x{P.n}"
        return
    yield "dimensions", True, f"{X.N} modes of {X.n}x{X.n}"
    if not np.isclose(X.theta, P.theta):
        yield "period", False, f"solution period {X.theta} differs from {P.theta}"
        return
    yield "period", True, f"theta {X.theta:g}, {X.G} samples"
    nodes = X.nodes()
    slack = float((min_eigenvalue(nodes) - psd_floor(nodes)).min())
    yield "positive_semidefinite", slack >= 0, f"worst lambda_min slack {slack:.3g}"
    sign = sign_condition_check(P, X)
    yield "sign_conditions", sign.passed, (
        f"R22 margin {sign.r22_margin:.3g}, Schur margin {sign.schur_margin:.3g}"
    )
    if not sign.passed:
        return
    res = float(residual_field(P, X).max())
    yield "residual", res <= tol, f"max residual {res:.3g} (bound {tol:g})"
    cert = esms_check(P, X)
    yield "mean_square_stability", cert.passed, f"{cert.kind} {cert.value:.6g}"


def _cmd_verify(args):
    P = load_problem(args.problem)
    X, _ = load_solution(args.solution, strict=True)
    ok = True
    for name, passed, detail in _verify(P, X, args.tol):
        _say(f"{'ok  ' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    if not ok:
        return EXIT_INVALID
    return EXIT_OK


def _cmd_generate(args):
    if args.n < 1 or args.seed < 0 or args.trial < 0:
        _say("error: --n must be >= 1; --seed and --trial must be >= 0")
        return EXIT_INVALID
    save_problem(generate_benchmark_instance(args.n, args.seed, args.trial), args.out)
    return EXIT_OK


def _cmd_experiment(args):
    spec = ExperimentSpec(
        dims=parse_dims(args.dims), trials_per_dim=args.trials, rng_seed=args.seed,
        workers=args.workers, timing=args.timing,
    )

    def progress(rows):
        r = rows[0]
        _say(f"n={r.n} trial={r.trial}: {r.status}")

    summary = run_campaign(spec, args.out, progress=progress)
    _say(
        f"{summary['converged']}/{summary['trials'] - summary['excluded']} converged, "
        f"{summary['excluded']} excluded"
    )
    return EXIT_OK


_COMMANDS = {
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "generate": _cmd_generate,
    "experiment": _cmd_experiment,
}


def main(argv=None):
    """Run the command line; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        return _COMMANDS[args.command](args)
    except OSError as exc:
        _say(f"I/O error: {exc}")
        return EXIT_IO
    except (NoConvergence, InnerFailure, SignConditionLost, MonotonicityViolation,
            UnstableSolution) as exc:
        _say(f"solver failed: {type(exc).__name__}: {exc}")
        return EXIT_NO_CONVERGENCE
    except AssumptionViolation as exc:
        _say(f"invalid problem: {exc}")
        return EXIT_INVALID
    except InvalidProblem as exc:
        _say(f"invalid input: {exc}")
        return EXIT_INVALID
    except (GTRDEError, ValueError, json.JSONDecodeError) as exc:
        _say(f"error: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
