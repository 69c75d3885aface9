"""Mean-square stability certificates for the closed loop.

For a closed loop ``dx = A0c x dt + sum_k Akc x dw_k`` with regime generator
``Q``, mean-square stability is governed by the Lyapunov-type operator

    Lop(X)(i) = A0c(i)' X(i) + X(i) A0c(i) + sum_k Akc(i)' X(i) Akc(i) + sum_j q_ij X(j)

Constant loops are certified by the spectral abscissa of its matrix; periodic
loops by the spectral radius of the one-period monodromy of the adjoint
(second-moment) equation ``dZ/dt = Lop(t)' Z``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, UnsupportedTimeVarying
from .grid import node_times
from .kernel import _gain_batch
from .linalg import min_eigenvalue, sym

__all__ = [
    "ClosedLoopSystem",
    "StabilityCertificate",
    "DetectabilityReport",
    "closed_loop",
    "lyapunov_generator",
    "apply_generator",
    "spectral_abscissa",
    "monodromy_radius",
    "esms_check",
    "detectability_sufficient",
]


@dataclass(eq=False)
class ClosedLoopSystem:
    """Closed-loop channel matrices ``A_k + B_k F``.

    ``A_cl`` has shape ``(N, r+1, n, n)`` for a constant loop, or
    ``(N, K, r+1, n, n)`` sampled on ``K`` equispaced nodes of ``[0, theta)``
    for a periodic one (``times`` is then set).
    """

    A_cl: np.ndarray
    Q: np.ndarray
    theta: float = 1.0
    times: np.ndarray = None

    @property
    def is_constant(self):
        return self.times is None


@dataclass
class StabilityCertificate:
    """``kind`` is ``"abscissa"`` (pass iff value < 0) or ``"monodromy"`` (value < 1)."""

    kind: str
    value: float
    passed: bool
    margin: float

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, "passed": self.passed, "margin": self.margin}


def _certificate(kind, value):
    value = float(value)
    if kind == "abscissa":
        return StabilityCertificate(kind, value, bool(value < 0), -value)
    return StabilityCertificate(kind, value, bool(value < 1), 1.0 - value)


def lyapunov_generator(cl):
    """Matrix of ``Lop`` on column-major ``vec`` of the stacked tuple.

    Uses ``vec(A X B) = (B' kron A) vec(X)``; the result is ``(N n^2, N n^2)``.
    """
    if not cl.is_constant:
        raise UnsupportedTimeVarying("time-varying loop: use the monodromy certificate")
    return _generator(cl.A_cl, cl.Q)


def _generator(A_cl, Q):
    N, _, n, _ = A_cl.shape
    d = n * n
    I = np.eye(n)
    out = np.zeros((N * d, N * d))
    for i in range(N):
        A0 = A_cl[i, 0]
        blk = np.kron(I, A0.T) + np.kron(A0.T, I)
        for Ak in A_cl[i, 1:]:
            blk += np.kron(Ak.T, Ak.T)
        out[i * d:(i + 1) * d, i * d:(i + 1) * d] = blk
        for j in range(N):
            out[i * d:(i + 1) * d, j * d:(j + 1) * d] += Q[i, j] * np.eye(d)
    return out


def apply_generator(A_cl, Q, X):
    """Direct evaluation of ``Lop(X)`` for a tuple ``X`` of shape ``(N, n, n)``."""
    out = np.tensordot(Q, X, axes=(1, 0))
    for i in range(X.shape[0]):
        A0 = A_cl[i, 0]
        out[i] += A0.T @ X[i] + X[i] @ A0
        for Ak in A_cl[i, 1:]:
            out[i] += Ak.T @ X[i] @ Ak
    return out


def spectral_abscissa(matrix):
    try:
        return float(np.linalg.eigvals(matrix).real.max())
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue computation failed: {exc}") from exc


def _node_generators(cl):
    """Generator matrices at the loop's sample nodes (constant loops: one node)."""
    if cl.is_constant:
        return [_generator(cl.A_cl, cl.Q)]
    return [_generator(cl.A_cl[:, j], cl.Q) for j in range(cl.A_cl.shape[1])]


def monodromy_radius(cl, steps=None):
    """Spectral radius of the one-period monodromy of ``dZ/dt = Lop(t)' Z``.

    Classic RK4 with stages on the nodes: a loop sampled on ``K`` nodes is
    stepped ``K / 2`` times. A constant loop uses ``steps`` steps (default 64).
    """
    gens = [g.T for g in _node_generators(cl)]
    if cl.is_constant:
        steps = 64 if steps is None else steps
        K = 2 * steps

        def gen(j):
            return gens[0]
    else:
        K = len(gens)
        if K % 2:
            raise ValueError("periodic loops need an even number of nodes")
        steps = K // 2

        def gen(j):
            return gens[j % K]

    d = cl.theta / steps
    Z = np.eye(gens[0].shape[0])
    for p in range(steps):
        a, b, c = gen(2 * p), gen(2 * p + 1), gen(2 * p + 2)
        k1 = a @ Z
        k2 = b @ (Z + 0.5 * d * k1)
        k3 = b @ (Z + 0.5 * d * k2)
        k4 = c @ (Z + d * k3)
        Z = Z + (d / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    try:
        return float(np.abs(np.linalg.eigvals(Z)).max())
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue computation failed: {exc}") from exc


def closed_loop(P, X, substeps=1):
    """Closed loop of the equilibrium feedback of a grid solution ``X``.

    Constant problems use the node average of ``X`` (all nodes agree up to
    solver tolerance) and give a constant loop.
    """
    if P.is_constant:
        c = P.sample([0.0])
        Xbar = X.nodes().mean(axis=1)[:, None]
        F = _gain_batch(c, P.Q, Xbar, np.array([0.0]))  # (N, 1, m, n)
        A_cl = c["A"] + c["B"] @ F[:, :, None]
        return ClosedLoopSystem(A_cl[:, 0], P.Q, P.theta)
    K = 2 * X.G * substeps
    times = node_times(P.theta, K)
    Xn = X.nodes() if substeps == 1 else X.at_times(times)
    c = P.sample(times)
    F = _gain_batch(c, P.Q, Xn, times)  # (N, K, m, n)
    A_cl = c["A"] + c["B"] @ F[:, :, None]
    return ClosedLoopSystem(A_cl, P.Q, P.theta, times)


def esms_check(P, X, method="auto"):
    """Certify exponential mean-square stability of the loop closed by ``X``.

    ``method`` is ``"auto"`` (abscissa for constant problems, monodromy
    otherwise), ``"abscissa"`` or ``"monodromy"``.
    """
    cl = closed_loop(P, X)
    if method == "auto":
        method = "abscissa" if cl.is_constant else "monodromy"
    if method == "abscissa":
        return _certificate("abscissa", spectral_abscissa(lyapunov_generator(cl)))
    if method == "monodromy":
        return _certificate("monodromy", monodromy_radius(cl, steps=X.G))
    raise ValueError(f"unknown method {method!r}")


@dataclass
class DetectabilityReport:
    """Per-mode outcome of the full-rank detectability test."""

    detectable: np.ndarray
    margin: np.ndarray

    @property
    def passed(self):
        return bool(np.all(self.detectable))


def detectability_sufficient(sub):
    """Sufficient detectability test for the frozen subproblem.

    ``M_h - L2_h R22_h^{-1} L2_h'`` positive definite (beyond
    ``1e-12 (1 + ||.||_F)``) at every node means the output matrix has full
    rank, which makes the pair detectable.
    """
    p = sub.partition
    _, _, R22 = p.split(sub.R)
    _, L2 = p.columns(sub.L)
    D = sym(sub.M - L2 @ np.linalg.solve(R22, np.swapaxes(L2, -1, -2)))
    lam = min_eigenvalue(D)  # (N, K)
    thr = 1e-12 * (1.0 + np.linalg.norm(D, axis=(-2, -1)))
    ok = np.all(lam > thr, axis=1)
    return DetectabilityReport(ok, lam.min(axis=1))
