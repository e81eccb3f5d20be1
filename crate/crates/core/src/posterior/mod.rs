//! Selection-adjusted posteriors on grids, frequentist selective intervals
//! and the two-compound example.

pub mod compound;
pub mod freq;
pub mod grid;
pub mod sa;

pub use compound::{compound_selection_posterior, CompoundPosterior, CompoundSetup};
pub use freq::{freq_selective_ci, freq_selective_ci_with, truncated_cdf, FreqCiOptions, SelectiveCi};
pub use grid::{summarize, PosteriorGrid, Summary};
pub use sa::{sa_posterior, sa_posterior_with, unadjusted_posterior, PosteriorOptions};

use crate::model::Loss;

/// Posterior expected loss `E[L(θ, y) | y]` of a discovery made at `y`.
pub fn posterior_expected_loss(post: &PosteriorGrid, loss: &Loss, y: f64) -> f64 {
    let atoms_below = |x: f64| post.atoms().iter().filter(|a| a.0 <= x).map(|a| a.1).sum::<f64>();
    let continuous_cdf = |x: f64| {
        if x == f64::NEG_INFINITY {
            0.0
        } else if x == f64::INFINITY {
            post.cdf(f64::MAX) - atoms_below(f64::MAX)
        } else {
            post.cdf(x) - atoms_below(x)
        }
    };
    let continuous: f64 = loss
        .loss_region(y)
        .intervals
        .iter()
        .map(|iv| continuous_cdf(iv.hi) - continuous_cdf(iv.lo))
        .sum();
    let atoms: f64 = post.atoms().iter().filter(|a| loss.value(a.0, y) > 0.0).map(|a| a.1).sum();
    (continuous + atoms).clamp(0.0, 1.0)
}
