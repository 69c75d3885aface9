import json

import numpy as np
import pytest

from gtrde import (
    GridSolution,
    IterationConfig,
    SolverConfig,
    comparison_experiment,
    load_solution,
    residual_norm,
    save_solution,
    solve,
)
from gtrde.errors import AssumptionViolation, InnerFailure, NoConvergence, UnstableSolution
from gtrde.experiment import generate_benchmark_instance
from gtrde.iteration import residual_field

from conftest import X_STAR, scalar_game


def newton_symmetric_oracle():
    """Newton on the coupled scalar system of the symmetric two-mode instance.

    Mode i: -3 x_i + x_j + 1 - (3/28) x_i^2 = 0.
    """
    x = np.zeros(2)
    for _ in range(50):
        F = -3 * x + x[::-1] + 1 - 3 / 28 * x**2
        J = np.array([[-3 - 3 / 14 * x[0], 1.0], [1.0, -3 - 3 / 14 * x[1]]])
        step = np.linalg.solve(J, -F)
        x += step
        if np.abs(step).max() < 1e-16:
            break
    return x


def test_scalar_game_two_steps():
    X, rep = solve(scalar_game())
    assert rep.iterations == 2 and rep.converged
    assert np.abs(X.nodes() - X_STAR).max() <= 1e-8
    assert rep.steps[-1].delta == 0.0


def test_symmetric_two_mode():
    P = scalar_game(N=2, Q=[[-1.0, 1.0], [1.0, -1.0]])
    X, rep = solve(P)
    oracle = newton_symmetric_oracle()
    np.testing.assert_allclose(oracle, X_STAR, atol=1e-14)
    for i in range(2):
        assert np.abs(X.nodes()[i] - oracle[i]).max() <= 1e-8
    assert residual_norm(P, X) <= 1e-10


def test_zero_weights_one_step():
    P = scalar_game(M=0.0)
    X, rep = solve(P)
    assert rep.iterations == 1 and not np.any(X.nodes())


def test_residual_of_zero_iterate_is_m():
    P = scalar_game()
    assert residual_norm(P, GridSolution.zeros(1, 1, 8)) == 1.0


def test_residual_uses_time_derivative():
    # X(t) = 0.5 + 0.1 cos(2 pi t) in dX/dt - 2X + M(t) with M = 1 - 0.2 pi sin(2 pi t)
    P = scalar_game(B0=(0.0, 0.0), M=1.0, amplitudes={"M": [[[-0.2 * np.pi]]]})
    t = np.arange(64) / 64
    f = lambda s: 0.5 + 0.1 * np.cos(2 * np.pi * s)  # noqa: E731
    X = GridSolution(f(t)[None, :, None, None], f(t + 1 / 128)[None, :, None, None], 1.0)
    # residual = -0.2 pi sin - 0.2 cos - 0.2 pi sin
    field = residual_field(P, X)
    s = X.node_times()
    expected = np.abs(-0.2 * np.pi * np.sin(2 * np.pi * s) - 0.2 * np.cos(2 * np.pi * s)
                      - 0.2 * np.pi * np.sin(2 * np.pi * s))
    np.testing.assert_allclose(field[0], expected, atol=1e-6)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_benchmark_ladder_and_residual(seed):
    P = generate_benchmark_instance(3, seed)
    X, rep = solve(P)
    assert rep.converged and rep.final_delta <= 1e-12
    for s in rep.steps:
        assert s.monotonicity >= -1e-10
        assert s.r22_margin > 0 and s.schur_margin > 0
    d = rep.deltas
    assert all(d[h] <= d[h - 2] for h in range(3, len(d)))
    assert rep.final_residual <= 100 * 1e-12
    assert rep.stability.passed
    assert rep.steps[0].detectable


def test_warm_start_idempotent():
    P = generate_benchmark_instance(2, 5)
    X, _ = solve(P)
    Y, rep = solve(P, initial=X)
    assert rep.iterations == 1
    assert rep.final_delta <= 1e-12


def test_warm_start_shape_check():
    with pytest.raises(ValueError):
        solve(scalar_game(), initial=GridSolution.zeros(1, 1, 8))


def test_assumption_violation():
    P = scalar_game(N=2, Q=[[-1.0, 0.5], [1.0, -1.0]])
    with pytest.raises(AssumptionViolation) as err:
        solve(P)
    assert err.value.report.failed() == ["generator"]


def test_outer_budget():
    P = generate_benchmark_instance(2, 5)
    with pytest.raises(NoConvergence) as err:
        solve(P, IterationConfig(max_outer_iterations=3))
    assert len(err.value.history) == 3


def test_inner_failure_is_wrapped():
    P = generate_benchmark_instance(2, 5)
    with pytest.raises(InnerFailure) as err:
        solve(P, scfg=SolverConfig(horizon_periods_initial=1, horizon_periods_max=1))
    assert err.value.h == 1
    assert isinstance(err.value.cause, NoConvergence)


def test_unstable_limit_is_rejected():
    # A0 = 3 with M = 0: the minimal solution is 0 and the loop stays unstable
    P = scalar_game(M=0.0, A0=3.0)
    with pytest.raises(UnstableSolution):
        solve(P)
    X, rep = solve(P, IterationConfig(check_stability=False))
    assert rep.converged and not np.any(X.nodes())


def test_comparison_scalar_bump():
    rep = comparison_experiment(scalar_game(), [[[1.0]]])
    a, b, c = 3 / 28, 2.0, -2.0
    bumped = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    assert np.abs(rep.bumped.nodes() - bumped).max() <= 1e-8
    assert rep.passed and rep.min_eigenvalue > 0.46


def test_comparison_zero_bump():
    P = generate_benchmark_instance(2, 3)
    rep = comparison_experiment(P, np.zeros((2, 2, 2)))
    assert rep.min_eigenvalue == 0.0 and rep.passed


def test_comparison_identity_bump():
    P = generate_benchmark_instance(3, 6)
    rep = comparison_experiment(P, np.stack([np.eye(3)] * 2))
    assert rep.passed and rep.min_eigenvalue >= -1e-9


def test_solution_file_round_trip(tmp_path):
    X, rep = solve(scalar_game())
    path = tmp_path / "x.json"
    save_solution(path, X, rep)
    Y, report = load_solution(path)
    np.testing.assert_array_equal(Y.nodes(), X.nodes())
    assert report["iterations"] == 2
    doc = json.loads(path.read_text())
    assert set(doc) == {"theta", "grid_points", "modes", "report"}


def test_iteration_config_validation():
    with pytest.raises(ValueError):
        IterationConfig(outer_tol=0.0)
    with pytest.raises(ValueError):
        IterationConfig(max_outer_iterations=0)
