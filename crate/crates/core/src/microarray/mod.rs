//! Gene-level selection-adjusted inference from per-gene means and
//! variances: a scaled-inverse-χ² prior on the variances, a Laplace prior on
//! the effects, moderated t statistics and directional selection rules.

pub mod discover;
pub mod fit;
pub mod kernel;
pub mod posterior;
pub mod records;
pub mod risk;
pub mod selection;
pub mod stats;

pub use discover::{count_discoveries, Discoveries, DiscoveryRule};
pub use fit::{fit_laplace_rate, fit_variance_prior, EbayesFit, DEFAULT_LAPLACE_RATE, MIN_FIT_RECORDS};
pub use kernel::sign_error_probability;
pub use posterior::{gene_posterior, gene_posterior_with, log_t_kernel, EffectPrior, GenePosteriorOptions};
pub use records::{ingest, ingest_reader, GeneRecord, Ingested, RejectedRow};
pub use risk::{gene_risk, GeneCalibration, GeneRiskTable, RiskGridOptions, CALIBRATION_PROBES};
pub use selection::{passes, selection_prob_mu, SelectionQuadrature, DOUBLING_TOLERANCE};
pub use stats::{bh_rejection_bound, moderated_t, moderated_t_rule, ordinary_t, TStatistic};
