"""Bayesian density estimation with trigonometric log-density expansions."""
from .basis import eval_basis, sobolev_weight, tail_constants
from .expfam import (
    Dataset,
    GridDensity,
    ModelConfig,
    density_eval,
    empirical_coeffs,
    in_ellipsoid,
    log_normalizer,
    sample,
)
from .metrics import hellinger, kl, kl_coefficient_bound, l2
from .estimators import (
    EstimateResult,
    approx_log_marginal,
    estimate_adaptive,
    estimate_fixed,
    estimate_laplace,
    estimate_sieve,
    hellinger_ball_estimate,
)
from .priors import PriorSpec, PriorVariant, dimension_N, prior_variance, sample_prior, sieve_weights
from .posterior import Chain, MCMCParams, contraction_diagnostic, posterior_mean_density, rw_metropolis
from .harness import TargetDensity, condition_diagnostics, figure1_replication, rate_study

__version__ = "0.1.0"
