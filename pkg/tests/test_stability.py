import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gtrde import GridSolution, ProblemData, esms_check, lyapunov_generator, solve, subproblem_assemble
from gtrde.errors import UnsupportedTimeVarying
from gtrde.experiment import generate_benchmark_instance
from gtrde.stability import (
    ClosedLoopSystem,
    apply_generator,
    closed_loop,
    detectability_sufficient,
    monodromy_radius,
    spectral_abscissa,
)

from conftest import X_STAR, random_sym, scalar_game


def loop(*channels, Q=((0.0,),)):
    """Scalar loop; each argument is one mode's channel tuple (a0, a1, ...)."""
    A = np.array([[[[a]] for a in ch] for ch in channels], dtype=float)
    return ClosedLoopSystem(A, np.array(Q, dtype=float))


def test_generator_examples():
    np.testing.assert_array_equal(lyapunov_generator(loop((-1.0,))), [[-2.0]])
    np.testing.assert_array_equal(lyapunov_generator(loop((-1.0, 1.0))), [[-1.0]])
    G = lyapunov_generator(loop((-1.0,), (-1.0,), Q=((-1.0, 1.0), (1.0, -1.0))))
    np.testing.assert_array_equal(G, [[-3.0, 1.0], [1.0, -3.0]])
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(G)), [-4.0, -2.0])


def test_unstable_fabricated_loop():
    cl = loop((-1.0, 1.5))
    assert spectral_abscissa(lyapunov_generator(cl)) == pytest.approx(0.25, abs=1e-15)


@given(st.integers(0, 2**31), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2))
def test_generator_matches_direct_formula(seed, n, N, r):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, r + 1, n, n))
    Q = rng.uniform(size=(N, N))
    Q -= np.diag(Q.sum(axis=1))
    X = np.stack([random_sym(rng, n) for _ in range(N)])
    G = lyapunov_generator(ClosedLoopSystem(A, Q))
    vec = np.concatenate([x.reshape(-1, order="F") for x in X])
    out = (G @ vec).reshape(N, n * n)
    direct = apply_generator(A, Q, X)
    for i in range(N):
        np.testing.assert_allclose(
            out[i], direct[i].reshape(-1, order="F"), atol=1e-12 * (1 + np.abs(direct).max())
        )


def test_time_varying_generator_rejected():
    cl = ClosedLoopSystem(np.zeros((1, 4, 1, 1, 1)), np.zeros((1, 1)), 1.0, np.arange(4) / 4)
    with pytest.raises(UnsupportedTimeVarying):
        lyapunov_generator(cl)


def test_monodromy_agrees_with_abscissa_on_random_loops():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 10:
        n, N = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        A = rng.standard_normal((N, 2, n, n)) * 0.6
        A[:, 0] -= rng.uniform(0.0, 1.5) * np.eye(n)
        Q = rng.uniform(size=(N, N))
        Q -= np.diag(Q.sum(axis=1))
        theta = float(rng.uniform(0.5, 2.0))
        cl = ClosedLoopSystem(A, Q, theta)
        absc = spectral_abscissa(lyapunov_generator(cl))
        if abs(absc) < 0.05:
            continue  # too close to the boundary for a sign test
        rho = monodromy_radius(cl)
        assert (rho < 1) == (absc < 0)
        assert rho == pytest.approx(np.exp(absc * theta), rel=1e-6)
        checked += 1


def test_esms_scalar_game():
    P = scalar_game()
    X = GridSolution.constant([[[X_STAR]]], 64)
    cert = esms_check(P, X)
    assert cert.kind == "abscissa" and cert.passed
    a_cl = -1 - 3 * X_STAR / 28
    assert cert.value == pytest.approx(2 * a_cl, abs=1e-12)
    assert cert.value == pytest.approx(-2.104417, abs=1e-6)
    mono = esms_check(P, X, method="monodromy")
    assert mono.passed
    assert mono.value == pytest.approx(np.exp(cert.value), rel=1e-6)


def test_esms_periodic_solution():
    P = scalar_game(amplitudes={"A": [[[[0.3]]]], "M": [[[0.5]]]})
    X, rep = solve(P)
    assert rep.stability.kind == "monodromy" and rep.stability.passed
    cl = closed_loop(P, X)
    assert not cl.is_constant and cl.A_cl.shape == (1, 128, 1, 1, 1)


def test_esms_unknown_method():
    with pytest.raises(ValueError):
        esms_check(scalar_game(), GridSolution.zeros(1, 1, 4), method="lmi")


@pytest.mark.parametrize("n", [1, 2])
def test_detectability_benchmark(n):
    # M >= 0.1 I while L2 R22^-1 L2' <= (0.1 n)^2 / 4 I
    for seed in range(10):
        P = generate_benchmark_instance(n, seed)
        rep = detectability_sufficient(subproblem_assemble(P, GridSolution.zeros(2, n, 8), 1))
        assert rep.passed and rep.margin.min() >= 0.09


def _detect(M, L2):
    P = ProblemData.constant(
        A=[[[[-1.0]]]], B=[[[[1.0, 1.0]]]], M=[[[M]]], L=[[[0.0, L2]]],
        R=[[[-7.0, 0.0], [0.0, 4.0]]], Q=[[0.0]], m1=1, m2=1,
    )
    return detectability_sufficient(subproblem_assemble(P, GridSolution.zeros(1, 1, 4), 1))


def test_detectability_boundary_and_zero():
    rep = _detect(1.0, 2.0)  # M = L2^2 / R22 exactly
    assert not rep.passed and rep.margin[0] == 0.0
    assert not _detect(0.0, 0.0).passed
    assert _detect(1.0, 0.0).passed
