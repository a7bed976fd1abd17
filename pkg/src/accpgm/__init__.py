"""Accelerated proximal gradient solver with generalized (a, b) momentum
for convex-composite single- and multi-objective optimization."""

from .diagnostics import (MeritSample, RateCheck, check_rate_bound,
                          merit_lower_bound, merit_lower_bound_curve,
                          pareto_certificate, sigma)
from .momentum import (PAIR_GRID, MomentumParams, MomentumState, closed_form_t,
                       gamma_sequence, initial_state, momentum_step,
                       momentum_table, t_sequence)
from .problems import (PROBLEM_NAMES, ProblemSpec, evaluate, gradient,
                       in_domain, make_problem)
from .prox import (BoxIndicator, InfeasibleCombinationError, SeparablePiece,
                   WeightedCombination, WeightedL1, Zero, combination_value,
                   piece_value, subgradient_residual, weighted_prox)
from .solver import (RunHistory, RunRecord, SolverConfig, backtrack_check,
                     multistart, solve)
from .subproblem import (DualSolverConfig, SubproblemError, SubproblemResult,
                         kkt_residual, phi_value, project_simplex_rows,
                         solve_subproblem, stationarity_residual)

__all__ = [
    "PAIR_GRID", "PROBLEM_NAMES",
    "MomentumParams", "MomentumState", "initial_state", "momentum_step",
    "momentum_table", "t_sequence", "gamma_sequence", "closed_form_t",
    "Zero", "WeightedL1", "BoxIndicator", "SeparablePiece",
    "WeightedCombination", "piece_value", "combination_value", "weighted_prox",
    "subgradient_residual", "InfeasibleCombinationError",
    "ProblemSpec", "evaluate", "gradient", "in_domain", "make_problem",
    "DualSolverConfig", "SubproblemResult", "SubproblemError", "phi_value",
    "solve_subproblem", "stationarity_residual", "kkt_residual",
    "project_simplex_rows",
    "SolverConfig", "RunRecord", "RunHistory", "solve", "multistart",
    "backtrack_check",
    "sigma", "merit_lower_bound", "merit_lower_bound_curve", "MeritSample",
    "RateCheck", "check_rate_bound", "pareto_certificate",
]

__version__ = "0.1.0"
