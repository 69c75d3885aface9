"""Two ways to certify mean-square stability of the closed loop.

For constant coefficients the spectral abscissa of the second-moment
generator decides it. The monodromy radius over one period gives the same
answer, with radius = exp(abscissa * period).
"""

import numpy as np

from gtrde import esms_check, solve
from gtrde.experiment import generate_benchmark_instance
from gtrde.stability import ClosedLoopSystem, lyapunov_generator, spectral_abscissa

for n in (1, 3, 5):
    P = generate_benchmark_instance(n, seed=11)
    X, _ = solve(P)
    absc = esms_check(P, X, method="abscissa")
    mono = esms_check(P, X, method="monodromy")
    print(f"n = {n}: abscissa {absc.value:+.6f}  radius {mono.value:.6f}"
          f"  exp(abscissa) {np.exp(absc.value):.6f}  stable {absc.passed and mono.passed}")

# a fabricated loop: dx = -x dt + 1.5 x dw is unstable in mean square
cl = ClosedLoopSystem(np.array([[[[-1.0]], [[1.5]]]]), np.zeros((1, 1)))
print(f"\nnoisy loop abscissa = {spectral_abscissa(lyapunov_generator(cl)):+.4f}")
