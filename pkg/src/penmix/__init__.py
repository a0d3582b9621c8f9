"""Penalized-likelihood selection of the number of Gaussian mixture components."""

from .errors import *  # noqa: F401,F403
from .gaussian import cholesky, log_density, regularize_cov, sample_gaussian, sym_eigenvalues
from .init import KMeansResult, init_from_kmeans, kmeans
from .kernels import BACKEND
from .mixture import (
    MixtureModel,
    log_likelihood,
    responsibilities,
    sample_mixture,
    weighted_mle_update,
)
from .pem import (
    EMConfig,
    EMTrace,
    fit_penalized,
    fit_standard_em,
    prune,
    update_weights_logeps,
    update_weights_scad,
    update_weights_scad_exact,
)
from .penalty import (
    PenaltyKind,
    PenaltySpec,
    free_params_per_component,
    penalized_objective,
    penalty_term,
    scad,
    scad_derivative,
)
from .harness import (
    ExperimentReport,
    Method,
    ProfileCurve,
    consistency_trend,
    match_components,
    profile_weight_curve,
    run_baselines,
    run_replications,
)
from .selection import aic_bic_search, bic_value, lambda_grid, select_lambda
from .simdata import DatasetSpec, example1_spec, example2_spec, generate, load_csv

__version__ = "0.1.0"
