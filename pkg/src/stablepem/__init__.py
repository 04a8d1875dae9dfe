"""Kernel-regularized SISO identification with forward-model stabilization."""

from .bayes import (
    Dataset,
    GramCache,
    IdentifyResult,
    PosteriorMoments,
    estimate_noise_variance,
    identify,
    neg_log_marginal,
    optimize_hyperparameters,
    posterior_moments,
)
from .benchmark import (
    BenchmarkConfig,
    BenchmarkResult,
    MethodOutcome,
    RunRecord,
    generate_armax_model,
    generate_dataset,
    relative_error,
    report_from_records,
    run_monte_carlo,
)
from .estimator import PemRegressor
from .kernels import Hyperparameters, build_regressors, output_covariance, stable_spline_kernel
from .lmi import SdpProblem, SdpSolution, project_stable, solve_sdp
from .lti import (
    ArmaxModel,
    ForwardModel,
    Polynomial,
    PredictorEstimate,
    companion,
    forward_to_predictor,
    is_schur_stable,
    one_step_predictions,
    poly_roots,
    predictor_to_forward,
    simulate_armax,
    spectral_radius,
)
from .mcmc import (
    HyperChain,
    HyperPrior,
    McmcResult,
    ProposalMixture,
    StableChain,
    effective_sample_size,
    mcmc_map,
    mcmc_posterior_mean,
    sample_hyperposterior,
    sample_stable_posterior,
    stabilize_mcmc,
    tune_gamma,
)
from .penalty import PenaltyParams, penalty, stabilize_ml_pf

__version__ = "0.1.0"

__all__ = [
    "ArmaxModel",
    "BenchmarkConfig",
    "BenchmarkResult",
    "Dataset",
    "ForwardModel",
    "GramCache",
    "HyperChain",
    "HyperPrior",
    "Hyperparameters",
    "IdentifyResult",
    "McmcResult",
    "MethodOutcome",
    "PemRegressor",
    "PenaltyParams",
    "Polynomial",
    "PosteriorMoments",
    "PredictorEstimate",
    "ProposalMixture",
    "RunRecord",
    "SdpProblem",
    "SdpSolution",
    "StableChain",
    "build_regressors",
    "companion",
    "effective_sample_size",
    "estimate_noise_variance",
    "forward_to_predictor",
    "generate_armax_model",
    "generate_dataset",
    "identify",
    "is_schur_stable",
    "mcmc_map",
    "mcmc_posterior_mean",
    "neg_log_marginal",
    "one_step_predictions",
    "optimize_hyperparameters",
    "output_covariance",
    "penalty",
    "poly_roots",
    "posterior_moments",
    "predictor_to_forward",
    "project_stable",
    "relative_error",
    "report_from_records",
    "run_monte_carlo",
    "sample_hyperposterior",
    "sample_stable_posterior",
    "simulate_armax",
    "solve_sdp",
    "spectral_radius",
    "stabilize_mcmc",
    "stabilize_ml_pf",
    "tune_gamma",
]
