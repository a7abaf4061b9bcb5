from .reduced import (CASES, ReducedProblem, f_of_t, level_minimizer, reduce_active_set,
                      reduce_constraints, solve_bc_sdp_path)
from .region import FeasibleRegion, LinearRegion, ReducedRegion, SolverResult, default_epsilon
from .solve import DEFAULT_STARTS, KKT_TOL, solve_bc_multistart, solve_wc

__all__ = [
    "CASES", "DEFAULT_STARTS", "FeasibleRegion", "KKT_TOL", "LinearRegion", "ReducedProblem",
    "ReducedRegion", "SolverResult", "default_epsilon", "f_of_t", "level_minimizer",
    "reduce_active_set", "reduce_constraints", "solve_bc_multistart", "solve_bc_sdp_path",
    "solve_wc",
]
