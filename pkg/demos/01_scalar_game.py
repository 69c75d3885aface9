"""A one-mode scalar game with a closed-form answer.

Dynamics dx = (-x + u + v) dt with weights M = 1 and R = diag(-7, 4). The
stationary equation reduces to (3/28) X^2 + 2 X - 1 = 0, so the stabilizing
solution is its positive root. The outer iteration lands on it in two steps.
"""

import numpy as np

from gtrde import ProblemData, solve

P = ProblemData.constant(
    A=[[[[-1.0]]]],
    B=[[[[1.0, 1.0]]]],
    M=[[[1.0]]],
    L=[[[0.0, 0.0]]],
    R=[[[-7.0, 0.0], [0.0, 4.0]]],
    Q=[[0.0]],
    m1=1,
    m2=1,
)

X, report = solve(P)
a, b, c = 3 / 28, 2.0, -1.0
root = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)

print(f"computed X       = {X.nodes()[0, 0, 0, 0]:.16f}")
print(f"quadratic root   = {root:.16f}")
print(f"outer steps      = {report.iterations}")
print(f"deltas           = {report.deltas}")
print(f"residual         = {report.final_residual:.2e}")
print(f"stability        = {report.stability.kind} {report.stability.value:.6f}")
