"""Exact evolution, reference limits and simulation for cooperative motion on Z."""

from .dist_core import (
    DistributionError,
    LatticeDist,
    ModelParams,
    dominates,
    parse_dist,
    parse_pairs,
    rescaled_cdf,
    sup_distance,
)
from .evolution import (
    SchemeMesh,
    StepLaw,
    evolve,
    evolve_iter,
    find_monotonicity_violation,
    monotone_region_bound,
    p_star,
    relaxation_bound,
    step_cdf,
    step_general,
    step_l_of_m,
    step_pmf,
    step_scheme,
)
from .hj_reference import (
    PiecewiseSolution,
    beta_limit_cdf,
    extended_limit_cdf,
    hopf_lax_numeric,
    legendre_closed,
    legendre_numeric,
    mixture_limit_cdf,
    u_ab_closed,
)
from .montecarlo import (
    TrajectoryConfig,
    sample_ensemble,
    sample_particle_system,
    sample_trajectory,
)

__all__ = [
    "DistributionError", "LatticeDist", "ModelParams", "dominates", "parse_dist",
    "parse_pairs", "rescaled_cdf", "sup_distance", "SchemeMesh", "StepLaw", "evolve",
    "evolve_iter", "find_monotonicity_violation", "monotone_region_bound", "p_star",
    "relaxation_bound", "step_cdf", "step_general", "step_l_of_m", "step_pmf",
    "step_scheme", "PiecewiseSolution", "beta_limit_cdf", "extended_limit_cdf",
    "hopf_lax_numeric", "legendre_closed", "legendre_numeric", "mixture_limit_cdf",
    "u_ab_closed", "TrajectoryConfig", "sample_ensemble", "sample_particle_system",
    "sample_trajectory",
]
