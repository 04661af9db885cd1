//! Bayesian bandwidth estimation: priors, the adaptive Metropolis sampler,
//! chain diagnostics, marginal likelihood and semi-metric selection.

mod chib;
mod diagnostics;
mod model;
mod prior;
mod sampler;
mod select;

pub use chib::{chib_marginal_likelihood, kde_log_density, MarginalLikelihood};
pub use diagnostics::{
    autocorrelation, batch_mean_se, diagnostics, naive_se, percentile, sif_from_se, summarize, ParameterSummary,
    PosteriorSummary, MAX_ACF_LAG, MIN_CHAIN_LENGTH,
};
pub use model::{reference_bandwidth, BandwidthModel, FplmModel, ModelState};
pub use prior::{log_unit_uniform, InverseGammaPrior, Priors};
pub use sampler::{
    adapt_tuning, log_posterior, log_prior, run_sampler, run_sampler_with, AcceptanceRates, BandwidthMode,
    ChainState, McmcChain, McmcConfig, TuningStep, TUNING_FLOOR,
};
pub use select::{select_semimetric, CandidateResult, SelectionReport};
