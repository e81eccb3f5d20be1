//! Priors, likelihoods, effect kinds, selection rules and losses, with the
//! selection probabilities `Pr(S | θ)` and `Pr(S | λ)`.

pub mod effect;
pub mod expect;
pub mod likelihood;
pub mod loss;
pub mod prior;
pub mod region;
pub mod rule;

pub use effect::{ConditionalPrior, EffectKind};
pub use expect::{marginal_selection_probability, prior_expectation, prior_grid, selection_probability_given_hyper};
pub use likelihood::Likelihood;
pub use loss::Loss;
pub use prior::{Component, Prior};
pub use region::{Interval, Region};
pub use rule::{selection_probability, Direction, ParamPoint, SelectionRule, Statistic};

/// Prior density at a point; the continuous part only, with Flat giving one.
pub fn prior_density(prior: &Prior, theta: f64) -> f64 {
    prior.density(theta)
}
