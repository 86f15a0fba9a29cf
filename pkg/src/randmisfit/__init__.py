"""Randomized data-misfit approximations for Bayesian inverse problems.

The library discretizes a low-dimensional inverse problem on a dense
quadrature grid, builds true / per-realization / realization-averaged
posteriors from random misfit families, and verifies Hellinger-distance
error bounds by brute-force quadrature plus Monte Carlo fidelity sweeps.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("randmisfit")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .bounds import (
    BoundReport,
    BoundRow,
    ExponentSet,
    RateFit,
    check_corollary,
    check_forward,
    check_thm1,
    check_thm2,
    fit_rate,
    sweep,
    thm1_conditions,
    thm2_conditions,
)
from .config import ConfigError, ExperimentConfig, parse_config
from .forward import (
    ForwardModel,
    GaussianNoise,
    affine_forward,
    gaussian_noise,
    mixed_forward,
    polynomial_forward,
    tabulated_forward,
    trigonometric_forward,
)
from .grids import GridSpace, build_grid, integrate
from .measures import (
    DensityMeasure,
    MixedNormSpec,
    PriorDensity,
    hellinger,
    lq_norm,
    mixed_norm,
    mixture_reference,
    normalize_log_density,
    truncated_gaussian_prior,
    uniform_prior,
)
from .misfits import (
    RandomMisfitFamily,
    SketchDistribution,
    direct_perturbation_misfit,
    misfit_family,
    misfit_realization,
    misfit_table,
    perturbed_forward,
    quadratic_misfit,
    sample_sketch,
    sketched_misfit,
)
from .posteriors import (
    ChainOutput,
    DegeneratePosteriorError,
    InverseProblem,
    MarginalPosterior,
    PosteriorBundle,
    approximate_posterior,
    batch_means_se,
    build_bundle,
    build_problem,
    marginal_posterior,
    mh_sample,
    moments,
    normalize,
)
from .runner import RunManifest, run_experiment, verify_manifest
from .streams import derive_stream

__all__ = [
    "__version__",
    "BoundReport", "BoundRow", "ExponentSet", "RateFit",
    "check_corollary", "check_forward", "check_thm1", "check_thm2",
    "fit_rate", "sweep", "thm1_conditions", "thm2_conditions",
    "ConfigError", "ExperimentConfig", "parse_config",
    "ForwardModel", "GaussianNoise", "affine_forward", "gaussian_noise",
    "mixed_forward", "polynomial_forward", "tabulated_forward",
    "trigonometric_forward",
    "GridSpace", "build_grid", "integrate",
    "DensityMeasure", "MixedNormSpec", "PriorDensity", "hellinger",
    "lq_norm", "mixed_norm", "mixture_reference", "normalize_log_density",
    "truncated_gaussian_prior", "uniform_prior",
    "RandomMisfitFamily", "SketchDistribution", "direct_perturbation_misfit",
    "misfit_family", "misfit_realization", "misfit_table", "perturbed_forward",
    "quadratic_misfit", "sample_sketch", "sketched_misfit",
    "ChainOutput", "DegeneratePosteriorError", "InverseProblem",
    "MarginalPosterior", "PosteriorBundle", "approximate_posterior",
    "batch_means_se", "build_bundle", "build_problem", "marginal_posterior",
    "mh_sample", "moments", "normalize",
    "RunManifest", "run_experiment", "verify_manifest",
    "derive_stream",
]
