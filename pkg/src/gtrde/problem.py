"""Problem instances: periodic coefficients, Markov generator and partitions.

A problem holds, for each of the ``N`` regimes, the coefficient families
``A_0..A_r`` (n x n), ``B_0..B_r`` (n x m), ``M`` (n x n, symmetric),
``L`` (n x m) and ``R`` (m x m, symmetric) of the coupled game Riccati
equations, together with the generator ``Q`` of the regime chain and the
common period ``theta``.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMode, InvalidProblem, ParseError
from .linalg import BlockPartition, min_eigenvalue, sym

__all__ = [
    "Coefficient",
    "ModeCoefficients",
    "ProblemData",
    "CoefficientSnapshot",
    "CheckResult",
    "ValidationReport",
    "evaluate",
    "validate_assumptions",
    "parse_problem",
    "serialize_problem",
    "load_problem",
    "save_problem",
]

_FIELDS = ("A", "B", "M", "L", "R")
_SYMMETRIC = ("M", "R")


@dataclass(frozen=True, eq=False)
class Coefficient:
    """A constant or single-harmonic periodic matrix-valued function.

    ``value(t) = base + amplitude * sin(2 pi t / theta)``; with no amplitude the
    coefficient is constant. The phase is reduced modulo ``theta`` first, so
    shifting ``t`` by one period returns the same value whenever ``t`` and
    ``t + theta`` reduce to the same float (e.g. for dyadic grid times).
    """

    base: np.ndarray
    amplitude: np.ndarray = None
    theta: float = 1.0

    def __post_init__(self):
        base = np.array(self.base, dtype=float)
        object.__setattr__(self, "base", base)
        if self.amplitude is not None:
            amp = np.array(self.amplitude, dtype=float)
            if amp.shape != base.shape:
                raise InvalidProblem(
                    f"amplitude shape {amp.shape} differs from base shape {base.shape}"
                )
            object.__setattr__(self, "amplitude", amp if np.any(amp) else None)
        if not self.theta > 0:
            raise InvalidProblem("period theta must be positive")

    @property
    def is_constant(self):
        return self.amplitude is None

    def _phase(self, t):
        return np.sin(2.0 * np.pi * (np.mod(t, self.theta) / self.theta))

    def __call__(self, t):
        if self.amplitude is None:
            return self.base.copy()
        return self.base + self.amplitude * float(self._phase(t))

    def sample(self, times):
        """Values at an array of times, stacked on a new leading axis."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if self.amplitude is None:
            return np.broadcast_to(self.base, times.shape + self.base.shape)
        s = self._phase(times).reshape(times.shape + (1,) * self.base.ndim)
        return self.base + s * self.amplitude


@dataclass(frozen=True, eq=False)
class ModeCoefficients:
    """Coefficient providers of one regime."""

    A: Coefficient  # (r+1, n, n)
    B: Coefficient  # (r+1, n, m)
    M: Coefficient  # (n, n)
    L: Coefficient  # (n, m)
    R: Coefficient  # (m, m)

    def providers(self):
        return {name: getattr(self, name) for name in _FIELDS}


@dataclass(frozen=True)
class CoefficientSnapshot:
    """All coefficient blocks of one mode at one time."""

    A: np.ndarray
    B: np.ndarray
    M: np.ndarray
    L: np.ndarray
    R: np.ndarray
    A_hat: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    R11: np.ndarray
    R12: np.ndarray
    R22: np.ndarray


@dataclass(frozen=True, eq=False)
class ProblemData:
    """A complete coupled game Riccati problem.

    Parameters
    ----------
    partition : BlockPartition
        Control split ``m = m1 + m2`` (player 1 maximizes, player 2 minimizes).
    Q : array_like, shape (N, N)
        Generator of the regime chain. Its sign/row-sum properties are checked
        by :func:`validate_assumptions`, not here.
    modes : sequence of ModeCoefficients
        One entry per regime.
    theta : float
        Common period of all coefficients.
    """

    partition: BlockPartition
    Q: np.ndarray
    modes: tuple
    theta: float = 1.0
    n: int = field(init=False)
    r: int = field(init=False)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "modes", tuple(self.modes))
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise InvalidProblem("period theta must be positive and finite")
        N = len(self.modes)
        if N < 1:
            raise InvalidProblem("at least one mode is required")
        if Q.shape != (N, N):
            raise InvalidProblem(f"generator must be {N}x{N}, got {Q.shape}")
        if not np.all(np.isfinite(Q)):
            raise InvalidProblem("generator has non-finite entries")
        first = self.modes[0].A.base
        if first.ndim != 3 or first.shape[1] != first.shape[2]:
            raise InvalidProblem(f"A must have shape (r+1, n, n), got {first.shape}")
        r, n = first.shape[0] - 1, first.shape[1]
        m = self.partition.m
        expected = {"A": (r + 1, n, n), "B": (r + 1, n, m), "M": (n, n), "L": (n, m), "R": (m, m)}
        for i, mode in enumerate(self.modes):
            for name, prov in mode.providers().items():
                if prov.base.shape != expected[name]:
                    raise InvalidProblem(
                        f"mode {i}: {name} has shape {prov.base.shape}, expected {expected[name]}"
                    )
                if not np.all(np.isfinite(prov.base)) or (
                    prov.amplitude is not None and not np.all(np.isfinite(prov.amplitude))
                ):
                    raise InvalidProblem(f"mode {i}: {name} has non-finite entries")
                if not prov.is_constant and prov.theta != self.theta:
                    raise InvalidProblem(f"mode {i}: {name} period differs from theta")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "r", r)

    @classmethod
    def constant(cls, A, B, M, L, R, Q, m1, m2, theta=1.0, amplitudes=None):
        """Build a problem from per-mode stacks.

        ``A`` has shape ``(N, r+1, n, n)``, ``B`` ``(N, r+1, n, m)``, ``M``
        ``(N, n, n)``, ``L`` ``(N, n, m)`` and ``R`` ``(N, m, m)``.
        ``amplitudes`` optionally maps field names to same-shape stacks, making
        those coefficients sinusoidal with period ``theta``.
        """
        arrays = dict(A=A, B=B, M=M, L=L, R=R)
        amplitudes = amplitudes or {}
        N = len(np.asarray(A))
        modes = []
        for i in range(N):
            provs = {}
            for name in _FIELDS:
                base = np.asarray(arrays[name], dtype=float)[i]
                amp = amplitudes.get(name)
                amp = None if amp is None else np.asarray(amp, dtype=float)[i]
                if name in _SYMMETRIC:
                    base = sym(base)
                    amp = None if amp is None else sym(amp)
                provs[name] = Coefficient(base, amp, theta)
            modes.append(ModeCoefficients(**provs))
        return cls(BlockPartition(int(m1), int(m2)), np.asarray(Q, dtype=float), modes, theta)

    @property
    def N(self):
        return len(self.modes)

    @property
    def m(self):
        return self.partition.m

    @property
    def is_constant(self):
        return all(p.is_constant for mode in self.modes for p in mode.providers().values())

    def with_modes(self, modes):
        return ProblemData(self.partition, self.Q, modes, self.theta)

    def sample(self, times):
        """Stacked coefficients on a time grid.

        Returns a dict with keys ``A, B, M, L, R`` holding arrays of shape
        ``(N, T, ...)``, plus ``A_hat`` (``A_0 + q_ii I / 2``).
        """
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = {
            name: np.stack([getattr(mode, name).sample(times) for mode in self.modes])
            for name in _FIELDS
        }
        shift = 0.5 * np.diag(self.Q)[:, None, None, None] * np.eye(self.n)
        out["A_hat"] = out["A"][:, :, 0] + shift
        return out

    def __eq__(self, other):
        if not isinstance(other, ProblemData):
            return NotImplemented
        if (
            self.partition != other.partition
            or self.theta != other.theta
            or self.N != other.N
            or not np.array_equal(self.Q, other.Q)
        ):
            return False
        for a, b in zip(self.modes, other.modes):
            for name in _FIELDS:
                pa, pb = getattr(a, name), getattr(b, name)
                if not np.array_equal(pa.base, pb.base):
                    return False
                if (pa.amplitude is None) != (pb.amplitude is None):
                    return False
                if pa.amplitude is not None and not np.array_equal(pa.amplitude, pb.amplitude):
                    return False
        return True

    __hash__ = None


def evaluate(P, t, i):
    """All coefficient blocks of mode ``i`` (0-based) at time ``t``."""
    if not 0 <= i < P.N:
        raise InvalidMode(f"mode {i} outside 0..{P.N - 1}")
    mode = P.modes[i]
    A, B, M, L, R = (getattr(mode, name)(t) for name in _FIELDS)
    p = P.partition
    R11, R12, R22 = p.split(R)
    B1, B2 = p.columns(B)
    L1, L2 = p.columns(L)
    A_hat = A[0] + 0.5 * P.Q[i, i] * np.eye(P.n)
    return CoefficientSnapshot(A, B, M, L, R, A_hat, B1, B2, L1, L2, R11, R12, R22)


@dataclass
class CheckResult:
    passed: bool
    worst_margin: float
    where: tuple = None  # (t, mode) or (row,) of the worst margin
    detail: str = ""


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_assumptions`, one entry per check."""

    checks: dict

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def failed(self):
        return [name for name, c in self.checks.items() if not c.passed]

    def summary(self):
        parts = []
        for name, c in self.checks.items():
            state = "ok" if c.passed else "FAIL"
            parts.append(f"{name}={state} (margin {c.worst_margin:.3g})")
        return ", ".join(parts)


def _generator_check(Q, tol=1e-12):
    N = Q.shape[0]
    off = Q[~np.eye(N, dtype=bool)]
    min_off = float(off.min()) if off.size else 0.0
    rowsum = np.abs(Q.sum(axis=1))
    worst_row = int(np.argmax(rowsum))
    ok = min_off >= 0 and rowsum[worst_row] <= tol
    margin = min(min_off, tol - float(rowsum[worst_row]))
    detail = f"min off-diagonal {min_off:.3g}, max |row sum| {rowsum[worst_row]:.3g}"
    return CheckResult(bool(ok), margin, (worst_row,), detail)


def validate_assumptions(P, grid_points=16):
    """Check the standing assumptions on a uniform grid of ``[0, theta)``.

    Checks
    ------
    ``generator``
        ``q_ij >= 0`` off the diagonal and every row sums to zero (1e-12).
    ``R22_positive``
        ``lambda_min(R22(t, i)) > 0``.
    ``M_minus_L2_R22inv_L2T_psd``
        ``lambda_min(M - L2 R22^{-1} L2') >= -1e-10 (1 + ||.||_F)``.
    """
    if grid_points < 1:
        raise ValueError("grid_points must be >= 1")
    times = np.arange(grid_points) * (P.theta / grid_points)
    c = P.sample(times)
    p = P.partition
    _, _, R22 = p.split(c["R"])
    _, L2 = p.columns(c["L"])
    checks = {"generator": _generator_check(P.Q)}

    lam = min_eigenvalue(R22)  # (N, T)
    idx = np.unravel_index(np.argmin(lam), lam.shape)
    checks["R22_positive"] = CheckResult(
        bool(lam[idx] > 0), float(lam[idx]), (float(times[idx[1]]), int(idx[0]))
    )

    if lam[idx] > 0:
        D = sym(c["M"] - L2 @ np.linalg.solve(R22, np.swapaxes(L2, -1, -2)))
        mu = min_eigenvalue(D)
        floor = -1e-10 * (1.0 + np.linalg.norm(D, axis=(-2, -1)))
        slack = mu - floor
        idx = np.unravel_index(np.argmin(slack), slack.shape)
        checks["M_minus_L2_R22inv_L2T_psd"] = CheckResult(
            bool(slack[idx] >= 0), float(mu[idx]), (float(times[idx[1]]), int(idx[0]))
        )
    else:
        checks["M_minus_L2_R22inv_L2T_psd"] = CheckResult(
            False, float("nan"), None, "skipped: R22 not positive definite"
        )
    return ValidationReport(checks)


# -- serialization ---------------------------------------------------------


def _to_list(a):
    return np.asarray(a, dtype=float).tolist()


def serialize_problem(P):
    """JSON text of a problem (row-major nested lists, repr-exact floats)."""
    doc = {
        "n": P.n,
        "r": P.r,
        "m1": P.partition.m1,
        "m2": P.partition.m2,
        "N": P.N,
        "theta": P.theta,
        "Q": _to_list(P.Q),
        "modes": [],
    }
    for mode in P.modes:
        entry = {name: _to_list(getattr(mode, name).base) for name in _FIELDS}
        amps = {
            name: _to_list(getattr(mode, name).amplitude)
            for name in _FIELDS
            if getattr(mode, name).amplitude is not None
        }
        if amps:
            entry["amplitudes"] = amps
        doc["modes"].append(entry)
    return json.dumps(doc, indent=1)


def _matrix(value, shape, path):
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(path, f"not a numeric array ({exc})") from None
    if a.shape != shape:
        raise ParseError(path, f"expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParseError(path, "non-finite entry")
    return a


def _int_field(doc, key, minimum):
    if key not in doc:
        raise ParseError(key, "missing field")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ParseError(key, f"expected integer >= {minimum}, got {v!r}")
    return v


def parse_problem(text):
    """Parse a problem document.

    Raises
    ------
    ParseError
        On malformed JSON or any schema violation (with the field path).
    InvalidProblem
        On a generator that is not a valid intensity matrix.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("", "top level must be an object")
    n = _int_field(doc, "n", 1)
    r = _int_field(doc, "r", 0)
    m1 = _int_field(doc, "m1", 1)
    m2 = _int_field(doc, "m2", 1)
    N = _int_field(doc, "N", 1)
    m = m1 + m2
    theta = doc.get("theta", 1.0)
    if isinstance(theta, bool) or not isinstance(theta, (int, float)) or not theta > 0:
        raise ParseError("theta", f"expected positive number, got {theta!r}")
    if "Q" not in doc:
        raise ParseError("Q", "missing field")
    Q = _matrix(doc["Q"], (N, N), "Q")
    modes_doc = doc.get("modes")
    if not isinstance(modes_doc, list) or len(modes_doc) != N:
        raise ParseError("modes", f"expected a list of {N} mode objects")
    shapes = {"A": (r + 1, n, n), "B": (r + 1, n, m), "M": (n, n), "L": (n, m), "R": (m, m)}
    stacks = {name: [] for name in _FIELDS}
    amps = {}
    for i, md in enumerate(modes_doc):
        if not isinstance(md, dict):
            raise ParseError(f"modes/{i}", "expected an object")
        for name in _FIELDS:
            if name not in md:
                raise ParseError(f"modes/{i}/{name}", "missing field")
            stacks[name].append(_matrix(md[name], shapes[name], f"modes/{i}/{name}"))
        amp_doc = md.get("amplitudes")
        if amp_doc is not None:
            if not isinstance(amp_doc, dict):
                raise ParseError(f"modes/{i}/amplitudes", "expected an object")
            for name, value in amp_doc.items():
                if name not in shapes:
                    raise ParseError(f"modes/{i}/amplitudes/{name}", "unknown field")
                amps.setdefault(name, {})[i] = _matrix(
                    value, shapes[name], f"modes/{i}/amplitudes/{name}"
                )
    amplitudes = {}
    for name, per_mode in amps.items():
        full = np.zeros((N,) + shapes[name])
        for i, a in per_mode.items():
            full[i] = a
        amplitudes[name] = full
    gen = _generator_check(Q)
    if not gen.passed:
        raise InvalidProblem(f"Q is not a generator: {gen.detail}")
    return ProblemData.constant(
        **{name: np.stack(v) for name, v in stacks.items()},
        Q=Q,
        m1=m1,
        m2=m2,
        theta=float(theta),
        amplitudes=amplitudes,
    )


def load_problem(path):
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


def save_problem(P, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_problem(P))
