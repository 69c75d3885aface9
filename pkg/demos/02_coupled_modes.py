"""Two regimes coupled through a Markov chain.

When both modes are identical, switching does not matter and each mode's
solution equals the single-mode answer. Making mode 2 cheaper to control
breaks the symmetry and the switching rate controls how far apart they sit.
"""

import numpy as np

from gtrde import ProblemData, solve


def game(M2, rate):
    return ProblemData.constant(
        A=[[[[-1.0]]], [[[-1.0]]]],
        B=[[[[1.0, 1.0]]], [[[1.0, 1.0]]]],
        M=[[[1.0]], [[M2]]],
        L=[[[0.0, 0.0]], [[0.0, 0.0]]],
        R=[[[-7.0, 0.0], [0.0, 4.0]]] * 2,
        Q=[[-rate, rate], [rate, -rate]],
        m1=1,
        m2=1,
    )


X, rep = solve(game(1.0, 1.0))
print("identical modes:", X.nodes()[:, 0, 0, 0], f"({rep.iterations} steps)")

print("\nM(2) = 3, varying switching rate")
for rate in (0.0, 0.1, 1.0, 10.0):
    X, rep = solve(game(3.0, rate))
    x1, x2 = X.nodes()[:, 0, 0, 0]
    print(f"  rate {rate:5.1f}: X(1) = {x1:.6f}  X(2) = {x2:.6f}  gap = {x2 - x1:.6f}"
          f"  steps = {rep.iterations}")
