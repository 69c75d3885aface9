"""Outer monotone iteration toward the stabilizing periodic solution.

Starting from ``X^(0) = 0``, every step freezes the coupling operators at the
previous iterate and solves ``N`` independent deterministic game Riccati
equations for their minimal PSD periodic solutions. The iterates increase in
the PSD order and converge to the stabilizing solution.
"""

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernel
from .errors import (
    AssumptionViolation,
    InnerFailure,
    MonotonicityViolation,
    NoConvergence,
    NonFiniteState,
    NumericalFailure,
    ParseError,
    UnstableSolution,
)
from .grid import GridSolution
from .problem import Coefficient, ModeCoefficients, validate_assumptions
from .solver import SolverConfig, minimal_solution
from .stability import detectability_sufficient, esms_check

__all__ = [
    "IterationConfig",
    "StepRecord",
    "IterationReport",
    "solve",
    "residual_field",
    "residual_norm",
    "ComparisonReport",
    "comparison_experiment",
    "save_solution",
    "load_solution",
]


@dataclass(frozen=True)
class IterationConfig:
    """Stopping rule and diagnostics of the outer loop.

    The loop stops once ``delta = max ||X^(h) - X^(h-1)||_F`` over nodes and
    modes is at most ``outer_tol``.
    """

    outer_tol: float = 1e-12
    max_outer_iterations: int = 500
    monotonicity_slack: float = 1e-10
    track_residual: bool = True
    check_stability: bool = True

    def __post_init__(self):
        if not self.outer_tol > 0:
            raise ValueError("outer_tol must be positive")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be >= 1")


@dataclass
class StepRecord:
    h: int
    delta: float
    residual: float
    monotonicity: float  # min lambda_min(X^(h) - X^(h-1))
    r22_margin: float
    schur_margin: float
    detectable: bool
    horizon_periods: int
    stalled: bool
    seconds: float


@dataclass
class IterationReport:
    steps: list = field(default_factory=list)
    converged: bool = False
    warnings: list = field(default_factory=list)
    final_residual: float = float("nan")
    stability: object = None
    wall_seconds: float = 0.0

    @property
    def iterations(self):
        return len(self.steps)

    @property
    def deltas(self):
        return [s.delta for s in self.steps]

    @property
    def final_delta(self):
        return self.steps[-1].delta if self.steps else float("nan")

    def to_dict(self):
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_delta": self.final_delta,
            "final_residual": self.final_residual,
            "warnings": list(self.warnings),
            "stability": None if self.stability is None else self.stability.to_dict(),
            "wall_seconds": self.wall_seconds,
            "steps": [asdict(s) for s in self.steps],
        }


def _xdot(X):
    """Time derivative on the periodic node grid (4th-order central differences)."""
    nodes = X.nodes()
    if X.spread() <= 1e-13:
        return np.zeros_like(nodes)
    h = X.theta / nodes.shape[1]
    roll = lambda k: np.roll(nodes, -k, axis=1)  # noqa: E731  value at j + k
    return (roll(-2) - 8.0 * roll(-1) + 8.0 * roll(1) - roll(2)) / (12.0 * h)


def residual_field(P, X):
    """Frobenius norm of the full-equation residual per mode and node, ``(N, 2G)``."""
    times = X.node_times()
    c = P.sample(times)
    res = kernel._residual_batch(c, P.Q, X.nodes(), _xdot(X), times)
    return np.linalg.norm(res, axis=(-2, -1))


def residual_norm(P, X):
    """Max over nodes and modes of the full-equation residual (Frobenius)."""
    return float(residual_field(P, X).max())


def _sign_margins(P, X):
    rep = kernel.sign_condition_check(P, X)
    return rep.r22_margin, rep.schur_margin


def solve(P, icfg=None, scfg=None, initial=None, validate=True):
    """Run the outer iteration.

    Parameters
    ----------
    P : ProblemData
    icfg : IterationConfig, optional
    scfg : SolverConfig, optional
    initial : GridSolution, optional
        Warm start. The monotonicity gate only applies to cold starts.
    validate : bool
        Check the standing assumptions first.

    Returns
    -------
    X : GridSolution
    report : IterationReport

    Raises
    ------
    AssumptionViolation, SignConditionLost, InnerFailure,
    MonotonicityViolation, NoConvergence, UnstableSolution
    """
    icfg = icfg or IterationConfig()
    scfg = scfg or SolverConfig()
    if validate:
        rep = validate_assumptions(P, scfg.grid_points)
        if not rep.passed:
            raise AssumptionViolation(rep)
    cold = initial is None
    X = GridSolution.zeros(P.N, P.n, scfg.grid_points, P.theta) if cold else initial
    if X.G != scfg.grid_points or X.N != P.N or X.n != P.n:
        raise ValueError("initial iterate does not match the problem / grid size")
    report = IterationReport()
    start = time.perf_counter()
    for h in range(1, icfg.max_outer_iterations + 1):
        t0 = time.perf_counter()
        sub = kernel.subproblem_assemble(P, X, h, scfg.rk4_substeps)
        detect = detectability_sufficient(sub)
        try:
            inner = minimal_solution(sub, P, cfg=scfg)
        except (NoConvergence, NonFiniteState, NumericalFailure) as exc:
            modes = getattr(exc, "modes", None)
            raise InnerFailure(h, modes[0] if modes else "all", exc) from exc
        Xh = inner.solution
        delta = Xh.delta(X)
        mono = Xh.min_eigenvalue_of_difference(X)
        r22, schur = _sign_margins(P, Xh)
        residual = residual_norm(P, Xh) if icfg.track_residual else float("nan")
        report.steps.append(
            StepRecord(
                h, delta, residual, mono, r22, schur, detect.passed,
                inner.horizon_periods, inner.stalled, time.perf_counter() - t0,
            )
        )
        if cold and mono < -icfg.monotonicity_slack:
            raise MonotonicityViolation(
                f"iterate {h} is not above iterate {h - 1}: lambda_min of difference = {mono:.3g}"
            )
        X = Xh
        if delta <= icfg.outer_tol:
            report.converged = True
            break
    else:
        raise NoConvergence(
            f"no convergence after {icfg.max_outer_iterations} outer steps "
            f"(last delta {report.final_delta:.3g})",
            report.deltas,
        )
    deltas = report.deltas
    if any(deltas[k] > deltas[k - 1] for k in range(3, len(deltas))):
        report.warnings.append("delta increased after the burn-in of 3 steps")
    if any(s.stalled for s in report.steps):
        report.warnings.append("inner horizon limit stalled at rounding level")
    report.final_residual = (
        report.steps[-1].residual if icfg.track_residual else residual_norm(P, X)
    )
    if icfg.check_stability:
        report.stability = esms_check(P, X)
        if not report.stability.passed:
            raise UnstableSolution(report.stability)
    report.wall_seconds = time.perf_counter() - start
    return X, report


@dataclass
class ComparisonReport:
    min_eigenvalue: float
    passed: bool
    base: GridSolution
    bumped: GridSolution


def comparison_experiment(P, bump, icfg=None, scfg=None, tol=1e-9):
    """Solve ``P`` and the problem with ``M(i) + bump(i)`` and compare.

    ``bump`` is an ``(N, n, n)`` stack of PSD increments. The ordering check
    passes iff ``min lambda_min(X' - X) >= -tol``.
    """
    bump = np.asarray(bump, dtype=float)
    modes = []
    for mode, b in zip(P.modes, bump):
        M = Coefficient(mode.M.base + 0.5 * (b + b.T), mode.M.amplitude, mode.M.theta)
        modes.append(ModeCoefficients(mode.A, mode.B, M, mode.L, mode.R))
    P2 = P.with_modes(modes)
    X1, _ = solve(P, icfg, scfg)
    X2, _ = solve(P2, icfg, scfg)
    lam = X2.min_eigenvalue_of_difference(X1)
    return ComparisonReport(lam, lam >= -tol, X1, X2)


def save_solution(path, X, report=None):
    doc = X.to_dict()
    doc["report"] = {} if report is None else report.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_solution(path, strict=True):
    """Return ``(GridSolution, report dict)`` from a solution file."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError("", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("", "top level must be an object")
    return GridSolution.from_dict(doc, strict=strict), doc.get("report", {})
