import numpy as np
import pytest

from gtrde import (
    GridSolution,
    ProblemData,
    SolverConfig,
    integrate_backward,
    minimal_solution,
    subproblem_assemble,
)
from gtrde.errors import NoConvergence, NonFiniteState
from gtrde.experiment import generate_benchmark_instance
from gtrde.linalg import min_eigenvalue

from conftest import X_STAR, scalar_game

LYAP_EXACT = 0.5 * (1.0 - np.exp(-2.0))  # dX/dt = 2X - 1, X(1) = 0, at t = 0


def first_subproblem(P, G=64):
    return subproblem_assemble(P, GridSolution.zeros(P.N, P.n, G, P.theta), 1)


def lyapunov_error(G):
    P = scalar_game(B0=(0.0, 0.0))
    sub = first_subproblem(P, G)
    _, X = integrate_backward(sub, P, 0, [[0.0]], 1.0, 0.0, SolverConfig(grid_points=G))
    return abs(X[0, 0, 0] - LYAP_EXACT)


def test_lyapunov_accuracy_and_order():
    e1, e2 = lyapunov_error(64), lyapunov_error(128)
    assert e1 <= 1e-8
    assert e1 / e2 >= 8.0


def test_substeps_match_finer_grid():
    P = scalar_game(B0=(0.0, 0.0))
    sub = subproblem_assemble(P, GridSolution.zeros(1, 1, 64), 1, substeps=2)
    _, X = integrate_backward(sub, P, 0, [[0.0]], 1.0, 0.0)
    assert abs(X[0, 0, 0] - LYAP_EXACT) == pytest.approx(lyapunov_error(128), rel=1e-6)


def test_steady_state_terminal_stays_put():
    P = scalar_game()
    sub = first_subproblem(P)
    _, X = integrate_backward(sub, P, 0, [[X_STAR]], 3.0, 0.0)
    assert np.abs(X - X_STAR).max() <= 1e-12


def test_zero_weights_give_zero():
    P = scalar_game(M=0.0)
    sub = first_subproblem(P)
    _, X = integrate_backward(sub, P, 0, [[0.0]], 2.0, 0.0)
    assert not np.any(X)
    res = minimal_solution(sub, P)
    assert not np.any(res.solution.nodes())


def test_integrate_returns_ascending_grid():
    P = scalar_game()
    sub = first_subproblem(P, 8)
    times, X = integrate_backward(sub, P, 0, [[0.0]], 1.0, 0.25, SolverConfig(grid_points=8))
    np.testing.assert_allclose(times, np.arange(2, 9) / 8)
    assert X.shape == (7, 1, 1) and X[-1, 0, 0] == 0.0


def test_integrate_rejects_misaligned_interval():
    P = scalar_game()
    sub = first_subproblem(P, 8)
    with pytest.raises(ValueError):
        integrate_backward(sub, P, 0, [[0.0]], 1.0, 0.1)
    with pytest.raises(ValueError):
        integrate_backward(sub, P, 0, [[0.0]], 0.0, 1.0)


def test_minimal_solution_lyapunov():
    P = scalar_game(B0=(0.0, 0.0))
    res = minimal_solution(first_subproblem(P), P)
    assert np.abs(res.solution.nodes() - 0.5).max() <= 1e-12


def test_minimal_solution_scalar_game():
    P = scalar_game()
    res = minimal_solution(first_subproblem(P), P)
    assert np.abs(res.solution.nodes() - X_STAR).max() <= 1e-8
    assert res.psd_margin > 0


def test_minimal_solution_single_mode_matches_batch():
    P = generate_benchmark_instance(2, seed=9)
    sub = first_subproblem(P)
    both = minimal_solution(sub, P).solution.nodes()
    one = minimal_solution(sub, P, i=1).solution.nodes()
    np.testing.assert_allclose(one[0], both[1], atol=1e-13)


def test_horizon_monotonicity():
    P = generate_benchmark_instance(3, seed=21)
    sub = first_subproblem(P, 16)
    cfg = SolverConfig(grid_points=16)
    for i in range(P.N):
        _, short = integrate_backward(sub, P, i, np.zeros((3, 3)), 2.0, 0.0, cfg)
        _, long = integrate_backward(sub, P, i, np.zeros((3, 3)), 5.0, 0.0, cfg)
        shared = long[: short.shape[0]]
        assert np.all(min_eigenvalue(shared - short) >= -1e-10)


def periodic_scalar():
    return scalar_game(amplitudes={"A": [[[[0.3]]]], "M": [[[0.5]]]})


def test_periodic_consistency_and_fixed_point():
    P = periodic_scalar()
    cfg = SolverConfig()
    sub = first_subproblem(P)
    sol = minimal_solution(sub, P, cfg=cfg).solution
    assert sol.spread() > 0.1  # genuinely time-varying
    _, X = integrate_backward(sub, P, 0, sol.samples[0, 0], P.theta, 0.0, cfg)
    assert np.abs(X[0] - sol.samples[0, 0]).max() <= 10 * cfg.inner_tol
    assert np.abs(X[:-1] - sol.samples[0]).max() <= 10 * cfg.inner_tol


def test_fixed_point_benchmark():
    P = generate_benchmark_instance(3, seed=4)
    cfg = SolverConfig()
    sub = first_subproblem(P)
    sol = minimal_solution(sub, P, cfg=cfg).solution
    for i in range(P.N):
        _, X = integrate_backward(sub, P, i, sol.samples[i, 0], P.theta, 0.0, cfg)
        assert np.linalg.norm(X[:-1] - sol.samples[i], axis=(-2, -1)).max() <= 10 * cfg.inner_tol


def test_half_samples_from_hermite_midpoints():
    # odd substep counts interpolate the half node; the error stays O(d^4)
    P = periodic_scalar()

    def run(s):
        sub = subproblem_assemble(P, GridSolution.zeros(1, 1, 16), 1, substeps=s)
        return minimal_solution(sub, P, cfg=SolverConfig(grid_points=16, rk4_substeps=s)).solution

    ref = run(8)
    for s in (1, 3):
        sol = run(s)
        full = np.abs(sol.samples - ref.samples).max()
        half = np.abs(sol.half_samples - ref.half_samples).max()
        assert half <= 20 * full
    assert np.abs(run(2).half_samples - ref.half_samples).max() <= 1e-7


def test_horizon_cap():
    P = scalar_game()
    cfg = SolverConfig(horizon_periods_initial=8, horizon_periods_max=8)
    with pytest.raises(NoConvergence):
        minimal_solution(first_subproblem(P), P, cfg=cfg)


def test_finite_escape_is_nonfinite_state():
    # with R11 = -0.1 the quadratic term makes dX/ds > 0 and unbounded backward
    P = ProblemData.constant(
        A=[[[[-1.0]]]], B=[[[[1.0, 1.0]]]], M=[[[1.0]]], L=[[[0.0, 0.0]]],
        R=[[[-0.1, 0.0], [0.0, 4.0]]], Q=[[0.0]], m1=1, m2=1,
    )
    sub = first_subproblem(P)
    with pytest.raises(NonFiniteState) as err:
        minimal_solution(sub, P)
    assert err.value.modes == [0]


def test_newton_refine_agrees():
    P = generate_benchmark_instance(2, seed=13)
    sub = first_subproblem(P)
    plain = minimal_solution(sub, P).solution.nodes()
    res = minimal_solution(sub, P, cfg=SolverConfig(newton_refine=True))
    assert res.newton_residual <= 1e-12
    assert np.abs(res.solution.nodes() - plain).max() <= 1e-10


@pytest.mark.parametrize(
    "kwargs",
    [
        {"grid_points": 3},
        {"grid_points": 0},
        {"rk4_substeps": 0},
        {"horizon_periods_initial": 16, "horizon_periods_max": 8},
        {"inner_tol": 0.0},
        {"stall_detection_window": 0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)
