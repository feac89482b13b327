"""Kernel ridge regression with adaptive, data-driven choice of the ridge parameter."""

from .kernel import (
    Dataset,
    GaussianKernel,
    TrigMercerKernel,
    cross_gram,
    eval_kernel,
    format_kernel,
    gram_matrix,
    parse_kernel,
    sup_norm_kappa,
)
from .select import (
    LambdaGrid,
    NoiseModel,
    SelectionResult,
    SelectionStep,
    asus_select,
    estimate_noise,
    geometric_grid,
    holdout_select,
    lp_select,
    u_quantity,
    uniform_grid,
    w_quantity,
)
from .spectral import (
    KrrModel,
    SpectralCache,
    build_cache,
    effective_dimension,
    krr_solve,
    resolvent_difference_check,
    weighted_norm,
)
from .synth import SourceTruth, generate_trial, make_truth, population_errors

__version__ = "0.1.0"

__all__ = [
    "Dataset", "GaussianKernel", "TrigMercerKernel", "cross_gram", "eval_kernel", "format_kernel",
    "gram_matrix", "parse_kernel", "sup_norm_kappa",
    "LambdaGrid", "NoiseModel", "SelectionResult", "SelectionStep", "asus_select", "estimate_noise",
    "geometric_grid", "holdout_select", "lp_select", "u_quantity", "uniform_grid", "w_quantity",
    "KrrModel", "SpectralCache", "build_cache", "effective_dimension", "krr_solve",
    "resolvent_difference_check", "weighted_norm",
    "SourceTruth", "generate_trial", "make_truth", "population_errors",
]
