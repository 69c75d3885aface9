"""Randomized campaigns on the two-mode, two-channel benchmark family.

Every matrix of every instance is drawn from its own counter-based stream
keyed by ``(seed, n, trial, mode, slot)``, so a campaign is a pure function
of its seed and adding dimensions or trials never perturbs existing ones.
"""

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    GTRDEError,
    InnerFailure,
    MonotonicityViolation,
    NoConvergence,
    NumericalFailure,
    SignConditionLost,
)
from .iteration import IterationConfig, residual_field, solve
from .problem import ProblemData, validate_assumptions
from .solver import SolverConfig
from .stability import esms_check

__all__ = [
    "CSV_HEADER",
    "STATUSES",
    "ExperimentSpec",
    "TrialResult",
    "generate_benchmark_instance",
    "run_trial",
    "run_campaign",
    "summarize",
    "parse_dims",
]

CSV_HEADER = ["n", "trial", "mode", "iters", "delta", "residual", "abscissa", "ms", "status"]
STATUSES = ("converged", "no_convergence", "inner_failure", "assumption_violation")

# stream slots within a mode; the generator draws from its own slot
_SLOTS = {name: k for k, name in enumerate(
    ["A", "H1", "H2", "Bk", "U11", "U22", "R12", "L", "U"]
)}
_Q_SLOT = 99


def _stream(seed, n, trial, mode, slot):
    ss = np.random.SeedSequence([int(seed), int(n), int(trial), int(mode), int(slot)])
    return np.random.Generator(np.random.Philox(ss))


def generate_benchmark_instance(n, seed, trial=0, N=2, r=2):
    """Random benchmark instance of state dimension ``n``.

    Per mode: ``A_0, A_1, A_2`` standard normal; ``B_0 = [4I - H1/2, 7I + H2/2]``
    with ``H`` uniform on [0, 1]; noise inputs uniform on [0, 0.01];
    ``R = [[-7I - U11'U11, R12], [R12', 4I + U22'U22]]``; ``R12``, ``L``
    uniform on [0, 0.1]; ``M = U'U + 0.1 I`` with ``U`` standard normal.
    Transition rates are uniform on [0, 1]. Both players have ``n`` inputs.

    Parameters
    ----------
    n : int
    seed : int
        Non-negative campaign seed.
    trial : int
        Trial index within the dimension.

    Returns
    -------
    ProblemData
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    I = np.eye(n)
    A = np.empty((N, r + 1, n, n))
    B = np.empty((N, r + 1, n, 2 * n))
    M = np.empty((N, n, n))
    L = np.empty((N, n, 2 * n))
    R = np.empty((N, 2 * n, 2 * n))
    for i in range(N):
        g = {name: _stream(seed, n, trial, i, k) for name, k in _SLOTS.items()}
        A[i] = g["A"].standard_normal((r + 1, n, n))
        B[i, 0, :, :n] = 4.0 * I - 0.5 * g["H1"].uniform(0.0, 1.0, (n, n))
        B[i, 0, :, n:] = 7.0 * I + 0.5 * g["H2"].uniform(0.0, 1.0, (n, n))
        B[i, 1:] = g["Bk"].uniform(0.0, 0.01, (r, n, 2 * n))
        U11 = g["U11"].uniform(0.0, 1.0, (n, n))
        U22 = g["U22"].uniform(0.0, 1.0, (n, n))
        R12 = g["R12"].uniform(0.0, 0.1, (n, n))
        R[i, :n, :n] = -7.0 * I - U11.T @ U11
        R[i, n:, n:] = 4.0 * I + U22.T @ U22
        R[i, :n, n:] = R12
        R[i, n:, :n] = R12.T
        L[i] = g["L"].uniform(0.0, 0.1, (n, 2 * n))
        U = g["U"].standard_normal((n, n))
        M[i] = U.T @ U + 0.1 * I
    rates = _stream(seed, n, trial, 0, _Q_SLOT).uniform(0.0, 1.0, (N, N))
    Q = rates * (1.0 - np.eye(N))
    Q -= np.diag(Q.sum(axis=1))
    return ProblemData.constant(A, B, M, L, R, Q, m1=n, m2=n, theta=1.0)


@dataclass(frozen=True)
class ExperimentSpec:
    """Campaign definition.

    ``timing`` fills the ``ms`` column with wall-clock milliseconds; it is off
    by default because timings break byte-identical reruns.
    """

    dims: tuple = tuple(range(1, 9))
    trials_per_dim: int = 50
    rng_seed: int = 0
    N: int = 2
    r: int = 2
    icfg: IterationConfig = field(default_factory=IterationConfig)
    scfg: SolverConfig = field(default_factory=SolverConfig)
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims or min(self.dims) < 1:
            raise ValueError("dims must be a nonempty list of positive integers")
        if self.trials_per_dim < 1:
            raise ValueError("trials_per_dim must be >= 1")
        if self.rng_seed < 0 or self.rng_seed >= 2**64:
            raise ValueError("rng_seed must fit in 64 unsigned bits")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class TrialResult:
    n: int
    trial: int
    mode: int  # 1-based
    iters: int
    delta: float
    residual: float
    abscissa: float
    ms: float
    status: str

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    def row(self):
        """CSV fields; floats use ``repr`` so output is exact and reproducible."""
        def f(x):
            return "" if x is None else repr(float(x))
        return [str(self.n), str(self.trial), str(self.mode), str(self.iters),
                f(self.delta), f(self.residual), f(self.abscissa), f(self.ms), self.status]


def _failure_rows(n, trial, N, status, iters, ms):
    nan = float("nan")
    return [TrialResult(n, trial, i + 1, iters, nan, nan, nan, ms, status) for i in range(N)]


def run_trial(spec, n, trial):
    """Generate, solve and verify one instance; one :class:`TrialResult` per mode.

    Never raises for solver trouble: failures become rows with the matching
    status. A converged solution that is not mean-square stabilizing keeps
    status ``converged`` and shows a nonnegative abscissa.
    """
    t0 = time.perf_counter()
    P = generate_benchmark_instance(n, spec.rng_seed, trial, spec.N, spec.r)

    def ms():
        return (time.perf_counter() - t0) * 1e3 if spec.timing else None

    if not validate_assumptions(P, spec.scfg.grid_points).passed:
        return _failure_rows(n, trial, P.N, "assumption_violation", 0, ms())
    icfg = IterationConfig(**{**asdict(spec.icfg), "check_stability": False})
    try:
        X, rep = solve(P, icfg, spec.scfg, validate=False)
    except NoConvergence as exc:
        return _failure_rows(n, trial, P.N, "no_convergence", len(exc.history or []), ms())
    except (InnerFailure, SignConditionLost, MonotonicityViolation, NumericalFailure, GTRDEError):
        return _failure_rows(n, trial, P.N, "inner_failure", 0, ms())
    res = residual_field(P, X).max(axis=1)
    try:
        absc = esms_check(P, X, method="abscissa").value
    except GTRDEError:
        absc = float("nan")
    elapsed = ms()
    return [
        TrialResult(n, trial, i + 1, rep.iterations, rep.final_delta, float(res[i]), absc,
                    elapsed, "converged")
        for i in range(P.N)
    ]


def _run_trial_args(args):
    return run_trial(*args)


def _quantiles(values):
    if not values:
        return None, None, None
    v = np.asarray(values)
    return float(np.quantile(v, 0.5)), float(np.quantile(v, 0.9)), float(v.max())


def summarize(spec, rows):
    """Summary document of a finished campaign (see :func:`run_campaign`)."""
    per_dim, medians = [], []
    trials_total = trials_ok = excluded = 0
    for n in spec.dims:
        mine = [r for r in rows if r.n == n]
        by_trial = {}
        for r in mine:
            by_trial.setdefault(r.trial, []).append(r)
        conv = sum(all(r.status == "converged" for r in rs) for rs in by_trial.values())
        excl = sum(rs[0].status == "assumption_violation" for rs in by_trial.values())
        failed = len(by_trial) - conv - excl
        p50, p90, pmax = _quantiles([r.residual for r in mine if r.status == "converged"])
        per_dim.append({
            "n": n, "converged": conv, "failed": failed, "excluded": excl,
            "residual_p50": p50, "residual_p90": p90, "residual_max": pmax,
        })
        medians.append(p50)
        trials_total += len(by_trial)
        trials_ok += conv
        excluded += excl
    eligible = trials_total - excluded
    known = [m for m in medians if m is not None]
    return {
        "per_dim": per_dim,
        "trials": trials_total,
        "excluded": excluded,
        "converged": trials_ok,
        "convergence_rate": trials_ok / eligible if eligible else None,
        "median_trend": {
            "medians": medians,
            "nondecreasing": bool(all(b >= a for a, b in zip(known, known[1:]))),
        },
        "config": {
            "dims": list(spec.dims),
            "trials_per_dim": spec.trials_per_dim,
            "rng_seed": spec.rng_seed,
            "N": spec.N,
            "r": spec.r,
            "iteration": asdict(spec.icfg),
            "solver": asdict(spec.scfg),
            "timing": spec.timing,
        },
    }


def _csv_line(fields):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(fields)
    return buf.getvalue()


def run_campaign(spec, out_dir, progress=None):
    """Run every ``(n, trial)`` of ``spec`` and write the results to ``out_dir``.

    Writes ``trials.csv`` (one row per mode, flushed after every trial, in
    ``(n, trial, mode)`` order whatever the worker count) and
    ``summary.json`` (per-dimension residual quantiles over converged rows,
    exclusion count, median trend and a config echo).

    Parameters
    ----------
    spec : ExperimentSpec
    out_dir : path-like
    progress : callable, optional
        Called with the rows of each finished trial.

    Returns
    -------
    dict
        The summary document.
    """
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(spec, n, t) for n in spec.dims for t in range(spec.trials_per_dim)]
    rows = []
    with open(os.path.join(out_dir, "trials.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_line(CSV_HEADER))
        fh.flush()
        if spec.workers > 1:
            pool = ProcessPoolExecutor(max_workers=spec.workers)
            results = pool.map(_run_trial_args, jobs)
        else:
            pool = None
            results = map(_run_trial_args, jobs)
        try:
            for trial_rows in results:
                fh.write("".join(_csv_line(r.row()) for r in trial_rows))
                fh.flush()
                rows.extend(trial_rows)
                if progress is not None:
                    progress(trial_rows)
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
    summary = summarize(spec, rows)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def parse_dims(text):
    """``"A..B"`` (inclusive), ``"A,B,C"`` or ``"A"`` to a tuple of ints."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            a, b = int(a), int(b)
            if b < a:
                raise ValueError
            return tuple(range(a, b + 1))
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"bad dimension range {text!r}; expected A..B") from None
