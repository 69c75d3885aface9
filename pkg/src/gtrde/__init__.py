"""Stabilizing periodic solutions of regime-switching stochastic game Riccati equations.

The solver decomposes the coupled stochastic equations into a monotone
sequence of decoupled deterministic game Riccati equations, each solved for
its minimal positive semidefinite periodic solution by backward integration.
"""

from .errors import *  # noqa: F401,F403
from .grid import GridSolution
from .iteration import (
    IterationConfig,
    IterationReport,
    comparison_experiment,
    load_solution,
    residual_norm,
    save_solution,
    solve,
)
from .kernel import (
    SubproblemData,
    deterministic_rhs,
    feedback_gain,
    gtrde_residual,
    pi_operators,
    sign_condition_check,
    subproblem_assemble,
)
from .linalg import BlockPartition, min_eigenvalue, schur_lower, signature
from .problem import (
    Coefficient,
    ModeCoefficients,
    ProblemData,
    evaluate,
    load_problem,
    parse_problem,
    save_problem,
    serialize_problem,
    validate_assumptions,
)
from .solver import SolverConfig, integrate_backward, minimal_solution
from .stability import (
    closed_loop,
    detectability_sufficient,
    esms_check,
    lyapunov_generator,
)

__version__ = "0.1.0"
