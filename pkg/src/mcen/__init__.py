"""Multivariate cluster elastic net.

Joint estimation of sparse regression coefficients and response-variable
clusters for multivariate gaussian and binomial regression, with
cross-validated tuning and a simulation harness.
"""

from ._backend import BACKEND
from .binomial_irls import (
    BinomialFit,
    BinomialSettings,
    fit_binomial,
    logistic,
    predict_proba,
    sen_glm_init,
    solve_fixed_groups_binomial,
    working_quantities,
)
from .data_model import (
    BINOMIAL,
    GAUSSIAN,
    ClusterPartition,
    CoefficientMatrix,
    DesignMatrix,
    ResponseMatrix,
    Standardizer,
    TuningTriple,
    canonical_form,
    partition_members,
    partitions_equal,
    standardize,
)
from .gaussian_cd import (
    GramCache,
    SolverSettings,
    closed_form_delta0,
    cd_update,
    delta_max,
    default_delta_grid,
    kkt_residual,
    objective_fixed_groups,
    population_target,
    soft_threshold,
    solve_elastic_net,
    solve_fixed_groups,
)
from .kmeans_fitted import KMeansSettings, cluster_fitted, cluster_vectors, partition_objective
from .mcen_gaussian import (
    McenFit,
    McenSettings,
    fit,
    fit_path,
    predict,
    sen_init,
)
from .model_selection import CvGrid, CvResult, cv_binomial, cv_gaussian, kfold_split
from .serialize import fit_from_dict, fit_from_json, fit_to_dict, fit_to_json
from .sim_harness import (
    SimDesign,
    SimResult,
    aspe,
    gen_binomial,
    gen_gaussian,
    kl_divergence,
    make_coefficients,
    mse_coef,
    run_replications,
    true_partition,
    tv_fv,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BINOMIAL",
    "GAUSSIAN",
    "BinomialFit",
    "BinomialSettings",
    "ClusterPartition",
    "CoefficientMatrix",
    "CvGrid",
    "CvResult",
    "DesignMatrix",
    "GramCache",
    "KMeansSettings",
    "McenFit",
    "McenSettings",
    "ResponseMatrix",
    "SimDesign",
    "SimResult",
    "SolverSettings",
    "Standardizer",
    "TuningTriple",
    "aspe",
    "canonical_form",
    "cd_update",
    "closed_form_delta0",
    "cluster_fitted",
    "cluster_vectors",
    "cv_binomial",
    "cv_gaussian",
    "default_delta_grid",
    "delta_max",
    "fit",
    "fit_binomial",
    "fit_from_dict",
    "fit_from_json",
    "fit_path",
    "fit_to_dict",
    "fit_to_json",
    "gen_binomial",
    "gen_gaussian",
    "kfold_split",
    "kkt_residual",
    "kl_divergence",
    "logistic",
    "make_coefficients",
    "mse_coef",
    "objective_fixed_groups",
    "partition_members",
    "partition_objective",
    "partitions_equal",
    "population_target",
    "predict",
    "predict_proba",
    "run_replications",
    "sen_glm_init",
    "sen_init",
    "soft_threshold",
    "solve_elastic_net",
    "solve_fixed_groups",
    "solve_fixed_groups_binomial",
    "standardize",
    "true_partition",
    "tv_fv",
    "working_quantities",
    "__version__",
]
