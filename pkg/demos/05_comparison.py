"""Raising the state weight can only raise the solution.

Each random instance is solved twice, once as given and once with a random
positive semidefinite increment added to M. The difference of solutions
stays positive semidefinite.
"""

import numpy as np

from gtrde import comparison_experiment
from gtrde.experiment import generate_benchmark_instance

rng = np.random.default_rng(5)
for k in range(6):
    n = 1 + k % 3
    P = generate_benchmark_instance(n, seed=5, trial=k)
    V = rng.standard_normal((2, n, n))
    rep = comparison_experiment(P, V @ np.swapaxes(V, -1, -2))
    print(f"n = {n} trial {k}: min eig(X' - X) = {rep.min_eigenvalue:.4e}  ordered {rep.passed}")
