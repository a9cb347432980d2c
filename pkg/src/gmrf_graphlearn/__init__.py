"""Gaussian Markov random field modeling of attributed graphs, with the
label propagation / graph convolution family of predictors derived from it."""

from .graph import (
    AttributeMatrix,
    Graph,
    apply_normalized_adjacency,
    apply_normalized_laplacian,
    apply_selfloop_adjacency,
    graph_from_edges,
    load_attributes,
    load_edge_list,
    watts_strogatz,
)
from .linalg import (
    CgConfig,
    ConvergenceError,
    LinearOperator,
    SlqConfig,
    conjugate_gradient,
    dense_conditional_gaussian,
    hutchinson_trace,
    slq_logdet,
)
from .gmrf import (
    FitConfig,
    FitResult,
    GaussianMarkovRandomField,
    GmrfParams,
    fit,
    log_potential,
    nll,
    nll_gradient,
    params_from_json,
    params_to_json,
    precision_dense,
    precision_matvec,
    precision_operator,
    sample,
    sample_conditional,
    synthetic_params,
)
from .smoothing import (
    PropagationBudget,
    SmoothingParam,
    alpha_to_omega,
    label_propagation,
    label_propagation_multiclass,
    label_propagation_unconstrained,
    omega_to_alpha,
    residual_propagation,
    smooth_features,
)
from .estimators import (
    FeatureSmoother,
    LabelPropagation,
    LinearGraphConvolution,
    ResidualPropagation,
    SimpleGraphConvolution,
    ThresholdClassifier,
    classify_by_threshold,
    make_lgc_rp,
    ols,
    tune_threshold,
)
from .linbp import (
    LinBpConfig,
    LinearizedBeliefPropagation,
    ResidualBeliefs,
    estimate_spectral_radius,
    linbp_classify,
    linbp_run,
    residual_priors_from_labels,
)
from .evaluation import (
    AccuracyEstimator,
    CvPlan,
    CvResult,
    K_GRID,
    OMEGA_GRID,
    SplitSpec,
    cross_validate,
    estimate_r2,
    f1_score,
    lgc_filter_response,
    marginalized_lp_oracle,
    r_squared,
    random_split,
    sgc_filter_response,
    split_from_outcomes,
)

__version__ = "0.1.0"
