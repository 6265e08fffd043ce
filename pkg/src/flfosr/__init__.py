"""Fast longitudinal function-on-scalar regression.

A blocked Gibbs sampler for functional mixed models with subject- and
replicate-level random effect functions: all coefficient functions are
drawn jointly in closed form given the variance components, which are
themselves conjugate. Includes a simulator, dense reference posteriors
for validation, and MCMC efficiency/accuracy diagnostics.
"""

from .basis import (
    OrthoBasis,
    RawBasis,
    build_bspline_basis,
    build_difference_penalty,
    make_basis,
    orthogonalize,
    project,
    with_difference_penalty,
)
from .data import (
    LongitudinalDataset,
    ProjectedData,
    expand,
    from_arrays,
    group_sum,
    load_dataset,
    standardize_covariates,
    write_dataset,
)
from .diagnostics import (
    AccuracyReport,
    EfficiencyReport,
    accuracy_report,
    efficiency_report,
    ess,
    summarize,
)
from .oracle import exact_joint_posterior, naive_gibbs
from .sampler import (
    CoefState,
    FitContext,
    PosteriorDraws,
    SamplerConfig,
    VarianceState,
    initialize_state,
    precompute,
    reconstruct_effects,
    run_gibbs,
    sample_alpha,
    sample_gamma,
    sample_omega,
    sample_variances,
)
from .simulate import SimulatedTruth, SimulationDesign, simulate_dataset

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "CoefState",
    "EfficiencyReport",
    "FitContext",
    "LongitudinalDataset",
    "OrthoBasis",
    "PosteriorDraws",
    "ProjectedData",
    "RawBasis",
    "SamplerConfig",
    "SimulatedTruth",
    "SimulationDesign",
    "VarianceState",
    "accuracy_report",
    "build_bspline_basis",
    "build_difference_penalty",
    "efficiency_report",
    "ess",
    "exact_joint_posterior",
    "expand",
    "from_arrays",
    "group_sum",
    "initialize_state",
    "load_dataset",
    "make_basis",
    "naive_gibbs",
    "orthogonalize",
    "precompute",
    "project",
    "reconstruct_effects",
    "run_gibbs",
    "sample_alpha",
    "sample_gamma",
    "sample_omega",
    "sample_variances",
    "simulate_dataset",
    "standardize_covariates",
    "summarize",
    "with_difference_penalty",
    "write_dataset",
]
