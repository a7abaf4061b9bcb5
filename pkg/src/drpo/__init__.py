"""Distributionally robust profit opportunities under Wasserstein ambiguity.

Closed-form worst- and best-case robust portfolio variance, the outer
portfolio problems over the strongly admissible region, robustness degrees,
critical ambiguity radii, and brute-force oracles for all of them.
"""
from .critical_search import (CriticalRadius, ProblemInputs, RobustnessResult, ThetaStar,
                              critical_radius_bc, critical_radius_wc, g_alpha, theta_star,
                              trajectory)
from .errors import DRPOError
from .market_data import (Moments, PriceSeries, ScenarioSet, build_scenario_set,
                          empirical_moments, load_prices)
from .outer_solver import (FeasibleRegion, SolverResult, solve_bc_multistart, solve_bc_sdp_path,
                           solve_wc)
from .restrictions import RestrictionSet
from .robust_variance import (AmbiguityRadius, Portfolio, best_case_variance,
                              worst_case_variance)

__version__ = "0.1.0"

__all__ = [
    "AmbiguityRadius", "CriticalRadius", "DRPOError", "FeasibleRegion", "Moments", "Portfolio",
    "PriceSeries", "ProblemInputs", "RestrictionSet", "RobustnessResult", "ScenarioSet",
    "SolverResult", "ThetaStar", "best_case_variance", "build_scenario_set",
    "critical_radius_bc", "critical_radius_wc", "empirical_moments", "g_alpha", "load_prices",
    "solve_bc_multistart", "solve_bc_sdp_path", "solve_wc", "theta_star", "trajectory",
    "worst_case_variance",
]
