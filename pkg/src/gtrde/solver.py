"""Minimal PSD periodic solutions of the frozen deterministic game equations.

Each outer step freezes the stochastic coupling, leaving for every mode

    dX/dt = -[A_hat' X + X A_hat + M_h - (X B0 + L_h) R_h^{-1} (B0' X + L_h')]

The minimal positive semidefinite periodic solution is the limit of the
finite-horizon solutions with zero terminal data as the horizon grows. We
integrate backward with classical RK4 on a fixed grid whose stages land on
nodes (full and half steps), so frozen weights are never interpolated.

Because the data are periodic and the horizon is a whole number of periods,
the horizon-``p`` solution restricted to ``[0, theta)`` is simply the ``p``-th
period of one long backward sweep; horizon doubling therefore costs no more
than integrating the longest horizon once.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NonFiniteState, NumericalFailure
from .grid import GridSolution
from .linalg import min_eigenvalue, psd_floor, sym

__all__ = ["SolverConfig", "InnerResult", "integrate_backward", "minimal_solution"]

DIVERGENCE_BOUND = 1e12


@dataclass(frozen=True)
class SolverConfig:
    """Integration and horizon settings of the inner solver.

    ``grid_points`` RK4 steps of size ``theta / (grid_points * rk4_substeps)``
    cover one period. The horizon starts at ``horizon_periods_initial`` periods
    and doubles up to ``horizon_periods_max``.
    """

    grid_points: int = 64
    rk4_substeps: int = 1
    horizon_periods_initial: int = 8
    horizon_periods_max: int = 4096
    inner_tol: float = 1e-13
    stall_detection_window: int = 3
    newton_refine: bool = False

    def __post_init__(self):
        if self.grid_points < 2 or self.grid_points % 2:
            raise ValueError("grid_points must be an even integer >= 2")
        if self.rk4_substeps < 1:
            raise ValueError("rk4_substeps must be >= 1")
        if not 1 <= self.horizon_periods_initial <= self.horizon_periods_max:
            raise ValueError("need 1 <= horizon_periods_initial <= horizon_periods_max")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")
        if self.stall_detection_window < 1:
            raise ValueError("stall_detection_window must be >= 1")


@dataclass
class InnerResult:
    """Minimal solution plus the horizon diagnostics that produced it."""

    solution: GridSolution
    horizon_periods: int
    changes: list = field(default_factory=list)
    stalled: bool = False
    psd_margin: float = 0.0
    newton_residual: float = None


class _Flow:
    """Node-indexed Riccati vector field for a batch of modes.

    The quadratic form is expanded once per node::

        (X B + L) R^{-1} (B' X + L') = X S X + X (B R^{-1} L') + (L R^{-1} B') X + L R^{-1} L'

    so a stage costs three matrix products.
    """

    def __init__(self, sub, P, modes):
        c = P.sample(sub.times)
        idx = list(modes)
        A_hat = c["A_hat"][idx]
        B0 = c["B"][idx][:, :, 0]
        Rinv = sub.R_inv[idx]
        L = sub.L[idx]
        BRi = B0 @ Rinv
        Abar = A_hat - BRi @ np.swapaxes(L, -1, -2)
        Mbar = sym(sub.M[idx] - L @ Rinv @ np.swapaxes(L, -1, -2))
        S = sym(BRi @ np.swapaxes(B0, -1, -2))
        self.K = sub.K
        self.constant = all(np.all(a == a[:, :1]) for a in (Abar, Mbar, S))
        if self.constant:
            Abar, Mbar, S = Abar[:, :1], Mbar[:, :1], S[:, :1]
        self.Abar, self.Mbar, self.S = Abar, Mbar, S
        self._nodes = [
            (np.ascontiguousarray(np.swapaxes(Abar[:, j], -1, -2)), Abar[:, j], Mbar[:, j], S[:, j])
            for j in range(Abar.shape[1])
        ]

    def __call__(self, j, X):
        AT, _, M, S = self._nodes[0 if self.constant else j % self.K]
        Y = AT @ X
        out = (X @ S) @ X
        out -= Y
        out -= Y.swapaxes(-1, -2)
        out -= M
        return out


def _rk4_back(flow, X, e, d):
    """One backward RK4 step from node ``e`` to node ``e - 2``; also returns f(e, X)."""
    k1 = flow(e, X)
    k2 = flow(e - 1, X - (0.5 * d) * k1)
    k3 = flow(e - 1, X - (0.5 * d) * k2)
    k4 = flow(e - 2, X - d * k3)
    acc = k2 + k3
    acc *= 2.0
    acc += k1
    acc += k4
    Xn = X - (d / 6.0) * acc
    Xn += Xn.swapaxes(-1, -2)
    Xn *= 0.5
    return Xn, k1


def _check_bound(X, where):
    if not np.all(np.isfinite(X)) or np.abs(X).max() > DIVERGENCE_BOUND:
        bad = np.abs(np.nan_to_num(X, nan=np.inf)).max(axis=(-2, -1)) > DIVERGENCE_BOUND
        err = NonFiniteState(
            f"state left [-1e12, 1e12] {where}; the finite-horizon problem has no solution"
        )
        err.modes = [int(k) for k in np.flatnonzero(bad)]
        raise err


def _sweep_period(flow, X, steps, d, record):
    """Integrate one period backward from its end (node ``2 * steps``) to 0.

    With ``record`` returns the state and forward derivative at every step
    point, ordered by increasing time. For a constant flow an exact
    floating-point fixed point of the RK4 map ends the sweep early: every
    later step would reproduce it bit for bit. The last return value flags
    that case.
    """
    xs = [None] * (steps + 1) if record else None
    fs = [None] * (steps + 1) if record else None
    for p in range(steps, 0, -1):
        Xn, f = _rk4_back(flow, X, 2 * p, d)
        if record:
            xs[p], fs[p] = X, f
        if flow.constant and np.array_equal(Xn, X):
            if record:
                xs[:p] = [X] * p
                fs[:p] = [f] * p
            return X, xs, fs, True
        X = Xn
    if record:
        xs[0], fs[0] = X, flow(0, X)
    return X, xs, fs, False


def _period_grid(xs, fs, G, s, d):
    """Full and half samples of one recorded period (shape (N, G, n, n))."""
    full = np.stack([xs[g * s] for g in range(G)], axis=1)
    if s % 2 == 0:
        half = np.stack([xs[g * s + s // 2] for g in range(G)], axis=1)
    else:
        # cubic Hermite midpoint of the step containing the half node
        q = [g * s + (s - 1) // 2 for g in range(G)]
        half = np.stack(
            [0.5 * (xs[k] + xs[k + 1]) + (d / 8.0) * (fs[k] - fs[k + 1]) for k in q], axis=1
        )
    return full, half


def integrate_backward(sub, P, i, terminal, t_end, t_start, cfg=SolverConfig()):
    """RK4 solution of mode ``i``'s terminal-value problem on ``[t_start, t_end]``.

    Both endpoints must be multiples of the step ``theta / (G * substeps)``
    where ``2 G substeps`` is the node count of ``sub``.

    Returns
    -------
    times : ndarray, shape (S + 1,)
        Step times in increasing order.
    samples : ndarray, shape (S + 1, n, n)
    """
    if not t_start < t_end:
        raise ValueError("need t_start < t_end")
    d = 2.0 * sub.theta / sub.K
    e = t_end / d
    b = t_start / d
    if abs(e - round(e)) > 1e-9 or abs(b - round(b)) > 1e-9:
        raise ValueError("t_start and t_end must be multiples of the RK4 step")
    e, b = int(round(e)), int(round(b))
    flow = _Flow(sub, P, [i])
    X = sym(np.asarray(terminal, dtype=float))[None]
    out = [X[0]]
    with np.errstate(over="ignore", invalid="ignore"):
        for p in range(e, b, -1):
            X, _ = _rk4_back(flow, X, 2 * p, d)
            _check_bound(X, f"at t={(p - 1) * d:.6g}")
            out.append(X[0])
    times = np.arange(b, e + 1) * d
    return times, np.stack(out[::-1])


def _newton_polish(flow, X0, tol=1e-14, max_iter=8):
    """Newton on the algebraic equation of a constant subproblem (per mode)."""
    X = X0.copy()
    res = np.inf
    for _ in range(max_iter):
        F = sym(np.swapaxes(flow.Abar[:, 0], -1, -2) @ X + X @ flow.Abar[:, 0] + flow.Mbar[:, 0]
                - X @ flow.S[:, 0] @ X)
        res = float(np.linalg.norm(F, axis=(-2, -1)).max())
        if res <= tol * (1.0 + np.linalg.norm(X, axis=(-2, -1)).max()):
            break
        Acl = flow.Abar[:, 0] - flow.S[:, 0] @ X
        for k in range(X.shape[0]):
            X[k] = sym(X[k] + scipy.linalg.solve_continuous_lyapunov(Acl[k].T, -F[k]))
    return X, res


def minimal_solution(sub, P, i=None, cfg=SolverConfig()):
    """Minimal PSD periodic solution of the frozen equations.

    Integrates backward from zero terminal data, comparing the first-period
    restriction at horizons ``H0, 2 H0, 4 H0, ...`` periods until consecutive
    restrictions differ by at most ``cfg.inner_tol`` (max-Frobenius over nodes
    and modes).

    Parameters
    ----------
    i : int or None
        Solve a single mode; ``None`` solves all modes in one batch.

    Returns
    -------
    InnerResult
        ``solution`` holds one mode per solved mode.

    Raises
    ------
    NonFiniteState
        The finite-horizon solution escaped the magnitude bound.
    NoConvergence
        The horizon cap was hit, or the change grew over
        ``stall_detection_window`` consecutive doublings above rounding level.
    NumericalFailure
        The limit is not positive semidefinite.
    """
    modes = range(P.N) if i is None else [i]
    flow = _Flow(sub, P, modes)
    s = sub.K // (2 * cfg.grid_points)
    if s * 2 * cfg.grid_points != sub.K:
        raise ValueError("subproblem node grid does not match cfg.grid_points")
    steps = cfg.grid_points * s
    d = sub.theta / steps
    X = np.zeros((len(modes), P.n, P.n))
    periods, checkpoint = 0, cfg.horizon_periods_initial
    prev, changes, stalled, stationary = None, [], False, False
    w = cfg.stall_detection_window
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            if stationary:
                # fixed point of a constant flow: later periods repeat it exactly
                periods = checkpoint
                full = np.repeat(X[:, None], cfg.grid_points, axis=1)
                half = full.copy()
            else:
                record = periods + 1 == checkpoint
                X, xs, fs, stationary = _sweep_period(flow, X, steps, d, record)
                periods += 1
                _check_bound(X, f"after {periods} periods")
                if not record:
                    continue
                full, half = _period_grid(xs, fs, cfg.grid_points, s, d)
            if prev is not None:
                diff = np.concatenate([full - prev[0], half - prev[1]], axis=1)
                change = float(np.linalg.norm(diff, axis=(-2, -1)).max())
                changes.append(change)
                if change <= cfg.inner_tol:
                    break
                if len(changes) > w and all(
                    changes[-k] >= changes[-k - 1] for k in range(1, w + 1)
                ):
                    scale = 1.0 + float(np.linalg.norm(full, axis=(-2, -1)).max())
                    if change <= 1e-12 * scale:
                        stalled = True  # rounding floor reached
                        break
                    raise NoConvergence(
                        f"horizon change grew over {w} doublings (last {change:.3g})", changes
                    )
            prev = (full, half)
            checkpoint *= 2
            if checkpoint > cfg.horizon_periods_max:
                raise NoConvergence(
                    f"horizon cap {cfg.horizon_periods_max} periods reached "
                    f"(last change {changes[-1] if changes else float('nan'):.3g})",
                    changes,
                )

    newton_residual = None
    if cfg.newton_refine and flow.constant:
        Xc, newton_residual = _newton_polish(flow, full.mean(axis=1))
        full = np.repeat(Xc[:, None], cfg.grid_points, axis=1)
        half = full.copy()
    sol = GridSolution(full, half, sub.theta)
    nodes = sol.nodes()
    slack = min_eigenvalue(nodes) - psd_floor(nodes)
    if np.any(slack < 0):
        k, j = np.unravel_index(np.argmin(slack), slack.shape)
        raise NumericalFailure(
            f"limit not positive semidefinite at mode {list(modes)[k]}, node {j} "
            f"(lambda_min = {min_eigenvalue(nodes[k, j]):.3g})"
        )
    return InnerResult(sol, periods, changes, stalled, float(slack.min()), newton_residual)
