"""Simulation and inference for multistage Michaelis-Menten enzyme cascades.

The package covers the full pipeline: exact jump-process simulation of the
cascade, its quasi-steady-state reduction to a single substrate-to-product
conversion, the Gaussian fluctuation model around that limit, the
mean-field particle system for conversion times, and likelihood-based
inference (maximum likelihood and Metropolis posterior sampling) from
samples of product formation times.
"""

from .fclt import (
    CovariancePath,
    FluctuationModel,
    diffusion_rate,
    diffusion_rate_bruteforce,
    drift_matrix,
    empirical_fluctuation,
    jump_vectors,
    simulate_fluctuation,
    simulate_fluctuation_batch,
    solve_covariance,
    sqrt_psd_2x2,
)
from .infer import (
    ChainConfig,
    InferenceProblem,
    MLEResult,
    OptimizerConfig,
    Posterior,
    RawParameterization,
    ReducedParameterization,
    UniformBoxPrior,
    count_modes,
    fit_bayes,
    fit_mle,
    kde,
    log_likelihood,
)
from .ips import (
    ChaosReport,
    ParticleRun,
    TauSample,
    chaos_diagnostics,
    sample_taus,
    simulate_ips,
    simulate_ips_direct,
    simulate_tagged,
)
from .model import (
    RELEASE,
    CascadeParams,
    FullState,
    ReactionId,
    ScaledState,
    ScalingRegime,
    apply_reaction,
    check_state,
    complex_states,
    propensity_full,
    scaled_propensity,
    stoichiometry,
)
from .poisson import (
    FastGenerator,
    PoissonSolution,
    apply_generator,
    centered_rhs,
    rate_matrix,
    solve_poisson,
)
from .qssa import (
    AveragedPropensities,
    ReducedPath,
    ReductionConstants,
    StationaryWeights,
    averaged_propensities,
    cell_derivatives,
    conversion_rate_constants,
    g_theta,
    h_theta,
    reduction_constants,
    solve_reduced_ode,
    solve_survival,
    stationary_pmf,
    stationary_weights,
    survival_from_constants,
    tau_distribution,
)
from .rk45 import DenseSolution, SolverError, solve, solve_scalar
from .ssa import (
    GridBatch,
    ScaledTrajectory,
    Trajectory,
    default_initial,
    simulate_batch,
    simulate_full,
    simulate_grid,
)
from .util import config_hash, fmt, mix_seed, parallel_map

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "apply_generator",
    "apply_reaction",
    "averaged_propensities",
    "AveragedPropensities",
    "CascadeParams",
    "cell_derivatives",
    "centered_rhs",
    "ChainConfig",
    "chaos_diagnostics",
    "ChaosReport",
    "check_state",
    "complex_states",
    "config_hash",
    "conversion_rate_constants",
    "count_modes",
    "CovariancePath",
    "default_initial",
    "DenseSolution",
    "diffusion_rate",
    "diffusion_rate_bruteforce",
    "drift_matrix",
    "empirical_fluctuation",
    "FastGenerator",
    "fit_bayes",
    "fit_mle",
    "FluctuationModel",
    "fmt",
    "FullState",
    "g_theta",
    "GridBatch",
    "h_theta",
    "InferenceProblem",
    "jump_vectors",
    "kde",
    "log_likelihood",
    "mix_seed",
    "MLEResult",
    "OptimizerConfig",
    "parallel_map",
    "ParticleRun",
    "PoissonSolution",
    "Posterior",
    "propensity_full",
    "rate_matrix",
    "RawParameterization",
    "ReactionId",
    "ReducedParameterization",
    "ReducedPath",
    "reduction_constants",
    "ReductionConstants",
    "RELEASE",
    "sample_taus",
    "scaled_propensity",
    "ScaledState",
    "ScaledTrajectory",
    "ScalingRegime",
    "simulate_batch",
    "simulate_fluctuation",
    "simulate_fluctuation_batch",
    "simulate_full",
    "simulate_grid",
    "simulate_ips",
    "simulate_ips_direct",
    "simulate_tagged",
    "solve",
    "solve_covariance",
    "solve_poisson",
    "solve_reduced_ode",
    "solve_scalar",
    "solve_survival",
    "SolverError",
    "sqrt_psd_2x2",
    "stationary_pmf",
    "stationary_weights",
    "StationaryWeights",
    "stoichiometry",
    "survival_from_constants",
    "tau_distribution",
    "TauSample",
    "Trajectory",
    "UniformBoxPrior",
]
