import numpy as np
import pytest
from hypothesis import settings

from gtrde import ProblemData

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# positive root of (3/28) x^2 + 2 x - 1 = 0 by the quadratic formula
_a, _b, _c = 3.0 / 28.0, 2.0, -1.0
X_STAR = (-_b + np.sqrt(_b * _b - 4 * _a * _c)) / (2 * _a)


def scalar_game(N=1, Q=None, M=1.0, A0=-1.0, B0=(1.0, 1.0), amplitudes=None, theta=1.0):
    """Scalar two-player instance with ``R = diag(-7, 4)`` and no noise."""
    Q = [[0.0]] if Q is None else Q
    return ProblemData.constant(
        A=[[[[A0]]]] * N,
        B=[[[list(B0)]]] * N,
        M=[[[M]]] * N,
        L=[[[0.0, 0.0]]] * N,
        R=[[[-7.0, 0.0], [0.0, 4.0]]] * N,
        Q=Q,
        m1=1,
        m2=1,
        theta=theta,
        amplitudes=amplitudes,
    )


def random_sym(rng, n):
    S = rng.standard_normal((n, n))
    return 0.5 * (S + S.T)


def random_psd(rng, n, rank=None):
    V = rng.standard_normal((n, rank or n))
    return V @ V.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = []


def record_acceptance(line):
    _ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
