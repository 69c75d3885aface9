"""Right-hand-side machinery of the coupled game Riccati equations.

Tuples ``X = (X(1), ..., X(N))`` are plain arrays of shape ``(N, n, n)``;
grid-sampled quantities carry an extra time axis, ``(N, T, ...)``.

The per-mode equation reads::

    dX/dt + A_hat' X + X A_hat + Pi1[X] + M
          - (X B0 + Pi2[X] + L) (R + Pi3[X])^{-1} (B0' X + Pi2[X]' + L') = 0

with ``A_hat = A0 + q_ii I / 2`` and the coupling operators

    Pi1[X](i) = sum_{l != i} q_il X(l) + sum_{k>=1} A_k' X(i) A_k
    Pi2[X](i) = sum_{k>=1} A_k' X(i) B_k
    Pi3[X](i) = sum_{k>=1} B_k' X(i) B_k
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMode, InvalidOperand, SignConditionLost, SingularInnerBlock
from .grid import node_times
from .linalg import _eigh, _eigvalsh, inverse_with_inertia, sym

__all__ = [
    "SubproblemData",
    "SignReport",
    "pi_operators",
    "gtrde_residual",
    "subproblem_assemble",
    "deterministic_rhs",
    "sign_condition_check",
    "feedback_gain",
]


def _T(a):
    return np.swapaxes(a, -1, -2)


def _coupling(Q, X):
    """``sum_{l != i} q_il X(l)`` for every mode; ``X`` has modes on axis 0."""
    Qoff = Q - np.diag(np.diag(Q))
    return np.tensordot(Qoff, X, axes=(1, 0))


def _pi(A, B, Q, X):
    """Batched Pi operators.

    ``A`` is ``(N, ..., r+1, n, n)``, ``B`` ``(N, ..., r+1, n, m)`` and ``X``
    ``(N, ..., n, n)`` with matching middle axes.
    """
    Ak, Bk = A[..., 1:, :, :], B[..., 1:, :, :]
    Xe = X[..., None, :, :]
    AkT_X = _T(Ak) @ Xe
    P1 = _coupling(Q, X) + (AkT_X @ Ak).sum(axis=-3)
    P2 = (AkT_X @ Bk).sum(axis=-3)
    P3 = (_T(Bk) @ Xe @ Bk).sum(axis=-3)
    return sym(P1), P2, sym(P3)


def _check_tuple(P, X, name="X"):
    X = np.asarray(X, dtype=float)
    if X.shape != (P.N, P.n, P.n):
        raise InvalidOperand(f"{name} must have shape {(P.N, P.n, P.n)}, got {X.shape}")
    return X


def pi_operators(P, t, X):
    """Evaluate ``(Pi1, Pi2, Pi3)`` at time ``t``.

    Returns arrays of shape ``(N, n, n)``, ``(N, n, m)`` and ``(N, m, m)``.
    """
    X = _check_tuple(P, X)
    c = P.sample([t])
    P1, P2, P3 = _pi(c["A"][:, 0], c["B"][:, 0], P.Q, X)
    return P1, P2, P3


def _inner_inverse(W, times, modes=None):
    inv, _, _, singular = inverse_with_inertia(W)
    if np.any(singular):
        i, j = np.argwhere(singular)[0]
        mode = int(i if modes is None else modes[i])
        raise SingularInnerBlock(mode, float(times[j]))
    return inv


def _residual_batch(c, Q, X, Xdot, times):
    """Residual of the full equation on sampled coefficients (axes N, T)."""
    P1, P2, P3 = _pi(c["A"], c["B"], Q, X)
    A_hat, B0 = c["A_hat"], c["B"][..., 0, :, :]
    lin = _T(A_hat) @ X + X @ A_hat + P1 + c["M"]
    G = X @ B0 + P2 + c["L"]
    Winv = _inner_inverse(c["R"] + P3, times)
    return sym(Xdot + lin - G @ Winv @ _T(G))


def gtrde_residual(P, t, X, Xdot):
    """Left-hand side of the coupled equations at ``t`` with ``dX/dt = Xdot``.

    Raises
    ------
    SingularInnerBlock
        If ``R + Pi3[X]`` is singular for some mode.
    """
    X = _check_tuple(P, X)
    Xdot = _check_tuple(P, Xdot, "Xdot")
    c = P.sample([t])
    out = _residual_batch(c, P.Q, X[:, None], Xdot[:, None], np.array([t]))
    return out[:, 0]


@dataclass(eq=False)
class SubproblemData:
    """Frozen per-mode weights of one outer step on the solver node grid.

    Attributes
    ----------
    h : int
        Outer iteration index (``h >= 1``).
    theta : float
    times : ndarray, shape (K,)
        Node grid; RK4 steps span two nodes.
    M, L, R : ndarray
        ``M^(h)``, ``L^(h)``, ``R^(h)`` with shapes ``(N, K, n, n)``,
        ``(N, K, n, m)``, ``(N, K, m, m)``.
    R_inv : ndarray
        Inverses of ``R^(h)``, computed after the inertia gate.
    partition : BlockPartition
    """

    h: int
    theta: float
    times: np.ndarray
    M: np.ndarray
    L: np.ndarray
    R: np.ndarray
    R_inv: np.ndarray
    partition: object

    @property
    def N(self):
        return self.M.shape[0]

    @property
    def K(self):
        return self.times.shape[0]

    def node_index(self, t):
        """Index of the node at time ``t`` (mod ``theta``); raises if off-grid."""
        s = np.mod(t, self.theta) * self.K / self.theta
        j = int(round(s))
        if abs(s - j) > 1e-9:
            raise ValueError(f"t={t} is not a node of the subproblem grid")
        return j % self.K


def subproblem_assemble(P, Xprev, h, substeps=1):
    """Freeze ``M^(h) = M + Pi1[Xprev]``, ``L^(h) = L + Pi2``, ``R^(h) = R + Pi3``.

    The node grid has ``2 G substeps`` points, where ``G`` is the grid size of
    ``Xprev``; with ``substeps > 1`` the previous iterate is interpolated.

    Raises
    ------
    SignConditionLost
        If some ``R^(h)(t, i)`` does not have ``m2`` positive and ``m1``
        negative eigenvalues.
    """
    if Xprev.N != P.N or Xprev.n != P.n:
        raise InvalidOperand("previous iterate does not match the problem dimensions")
    K = 2 * Xprev.G * substeps
    times = node_times(P.theta, K)
    X = Xprev.nodes() if substeps == 1 else Xprev.at_times(times)
    c = P.sample(times)
    P1, P2, P3 = _pi(c["A"], c["B"], P.Q, X)
    Mh = sym(c["M"] + P1)
    Lh = c["L"] + P2
    Rh = sym(c["R"] + P3)
    R_inv, n_pos, n_neg, _ = inverse_with_inertia(Rh)
    p = P.partition
    bad = (n_pos != p.m2) | (n_neg != p.m1)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        zero = p.m - n_pos[i, j] - n_neg[i, j]
        raise SignConditionLost(h, float(times[j]), int(i), (int(n_pos[i, j]), int(n_neg[i, j]), int(zero)))
    return SubproblemData(h, P.theta, times, Mh, Lh, Rh, R_inv, p)


def deterministic_rhs(sub, P, t, i, Xi):
    """``dX/dt`` of mode ``i``'s frozen deterministic game Riccati equation.

    ``t`` must be a node of ``sub``. Modes are decoupled here: the regime
    coupling survives only through ``A_hat`` and the frozen weights.
    """
    if not 0 <= i < P.N:
        raise InvalidMode(f"mode {i} outside 0..{P.N - 1}")
    j = sub.node_index(t)
    c = P.sample([sub.times[j]])
    A_hat = c["A_hat"][i, 0]
    B0 = c["B"][i, 0, 0]
    Xi = np.asarray(Xi, dtype=float)
    G = Xi @ B0 + sub.L[i, j]
    rhs = A_hat.T @ Xi + Xi @ A_hat + sub.M[i, j] - G @ sub.R_inv[i, j] @ G.T
    return -sym(rhs)


@dataclass
class SignReport:
    """Admissibility margins of a grid solution.

    ``r22_min[i, j]`` is ``lambda_min(R22[X])`` and ``schur_max[i, j]`` is
    ``lambda_max`` of the Schur complement of ``R22[X]`` in ``R + Pi3[X]``,
    both at node ``times[j]`` of mode ``i``. ``inertia_ok`` compares the
    inertia of ``R + Pi3[X]`` with ``diag(-I_m1, I_m2)``.
    """

    times: np.ndarray
    r22_min: np.ndarray
    schur_max: np.ndarray
    inertia_ok: np.ndarray

    @property
    def passed(self):
        return bool(
            np.all(self.r22_min > 0) and np.all(self.schur_max < 0) and np.all(self.inertia_ok)
        )

    @property
    def r22_margin(self):
        return float(self.r22_min.min())

    @property
    def schur_margin(self):
        """Distance of the worst Schur eigenvalue below zero (positive is good)."""
        return float(-self.schur_max.max())

    def worst(self):
        """``(t, mode)`` of the smallest combined margin."""
        slack = np.minimum(self.r22_min, -self.schur_max)
        i, j = np.unravel_index(np.argmin(slack), slack.shape)
        return float(self.times[j]), int(i)


def sign_condition_check(P, X):
    """Check ``R22[X] > 0`` and ``R22#[X] < 0`` at every node of ``X``."""
    times = X.node_times()
    c = P.sample(times)
    _, _, W = _pi(c["A"], c["B"], P.Q, X.nodes())
    W = sym(c["R"] + W)
    p = P.partition
    W11, W12, W22 = p.split(W)
    w22, V = _eigh(W22)
    r22_min = w22[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        T = W12 @ V
        schur = sym(W11 - (T / w22[..., None, :]) @ _T(T))
    schur_max = _eigvalsh(schur)[..., -1]
    _, n_pos, n_neg, _ = inverse_with_inertia(W)
    inertia_ok = (n_pos == p.m2) & (n_neg == p.m1)
    schur_max = np.where(np.isfinite(schur_max), schur_max, np.inf)
    return SignReport(times, r22_min, schur_max, inertia_ok)


def _gain_batch(c, Q, X, times):
    _, P2, P3 = _pi(c["A"], c["B"], Q, X)
    B0 = c["B"][..., 0, :, :]
    GT = _T(X @ B0 + P2 + c["L"])
    Winv = _inner_inverse(c["R"] + P3, times)
    return -Winv @ GT


def feedback_gain(P, t, X):
    """Equilibrium feedback ``F = -(R + Pi3[X])^{-1} (B0' X + Pi2[X]' + L')``.

    Returns an array of shape ``(N, m, n)``.
    """
    X = _check_tuple(P, X)
    c = P.sample([t])
    return _gain_batch(c, P.Q, X[:, None], np.array([t]))[:, 0]
