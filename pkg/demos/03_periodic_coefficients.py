"""Time-varying coefficients with period one.

The drift and the state weight carry a single harmonic. The solution is a
periodic curve, and the closed loop is certified through its monodromy
operator instead of a generator spectrum.
"""

import numpy as np

from gtrde import ProblemData, residual_norm, solve

P = ProblemData.constant(
    A=[[[[-1.0]]]],
    B=[[[[1.0, 1.0]]]],
    M=[[[1.0]]],
    L=[[[0.0, 0.0]]],
    R=[[[-7.0, 0.0], [0.0, 4.0]]],
    Q=[[0.0]],
    m1=1,
    m2=1,
    # A(t) = -1 + 0.3 sin(2 pi t), M(t) = 1 + 0.5 sin(2 pi t)
    amplitudes={"A": [[[[0.3]]]], "M": [[[0.5]]]},
)

X, rep = solve(P)
t = X.node_times()
x = X.nodes()[0, :, 0, 0]
print(f"grid points      = {X.G}")
print(f"min / max X(t)   = {x.min():.6f} / {x.max():.6f}")
for k in range(0, X.G, X.G // 8):
    print(f"  t = {t[k]:.3f}  X = {x[k]:.6f}")
print(f"outer steps      = {rep.iterations}")
print(f"residual         = {residual_norm(P, X):.2e}")
print(f"stability        = {rep.stability.kind} radius {rep.stability.value:.4f}")
