//! Closed-form joint and marginal densities of `(θ, y)` for location priors
//! under a normal likelihood.

use crate::error::{Error, Result};
use crate::model::{Likelihood, Loss, Prior, SelectionRule};
use crate::numerics::special::{log_add_exp, normal_log_interval, normal_log_pdf};

use super::sabayes::resolve_region;

/// `log ∫_lo^hi π_c(θ) φ_σ(y − θ) dθ` over the continuous part `π_c` of the
/// prior; `-inf` when the prior has no continuous mass there.
pub fn log_joint_interval(prior: &Prior, sigma: f64, y: f64, lo: f64, hi: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(match prior {
        Prior::Normal { mean, var } => {
            let total = var + sigma * sigma;
            let sd_m = total.sqrt();
            let post_var = var * sigma * sigma / total;
            let post_mean = (var * y + sigma * sigma * mean) / total;
            let sd_p = post_var.sqrt();
            normal_log_pdf((y - mean) / sd_m) - sd_m.ln() + normal_log_interval((lo - post_mean) / sd_p, (hi - post_mean) / sd_p)
        }
        Prior::Laplace { rate } => {
            let r = *rate;
            let s2 = sigma * sigma;
            let base = (0.5 * r).ln() + 0.5 * r * r * s2;
            // θ ≥ 0: e^{-rθ} φ_σ(y − θ) = e^{-ry + r²σ²/2} φ_σ(θ − (y − rσ²))
            let m_pos = y - r * s2;
            let pos = if hi > 0.0 {
                base - r * y + normal_log_interval((lo.max(0.0) - m_pos) / sigma, (hi - m_pos) / sigma)
            } else {
                f64::NEG_INFINITY
            };
            let m_neg = y + r * s2;
            let neg = if lo < 0.0 {
                base + r * y + normal_log_interval((lo - m_neg) / sigma, (hi.min(0.0) - m_neg) / sigma)
            } else {
                f64::NEG_INFINITY
            };
            log_add_exp(pos, neg)
        }
        Prior::Mixture { components } => {
            let mut acc = f64::NEG_INFINITY;
            for c in components {
                acc = log_add_exp(acc, c.weight.ln() + log_joint_interval(&c.prior, sigma, y, lo, hi)?);
            }
            acc
        }
        Prior::TwoGroup { pi0, alt } => (1.0 - pi0).ln() + log_joint_interval(alt, sigma, y, lo, hi)?,
        Prior::PointMass { .. } => f64::NEG_INFINITY,
        Prior::Flat => {
            return Err(Error::Config(
                "the marginal density is undefined under an improper prior; fit a proper (empirical Bayes) prior first"
                    .into(),
            ))
        }
        Prior::ScaledInvChiSq { .. } => {
            return Err(Error::Unsupported("a variance prior is not a location prior".into()))
        }
    })
}

fn log_atom_term(sigma: f64, y: f64, at: f64, mass: f64) -> f64 {
    mass.ln() + normal_log_pdf((y - at) / sigma) - sigma.ln()
}

/// `log m(y)`, the log marginal density of `y`.
pub fn log_marginal_density(prior: &Prior, sigma: f64, y: f64) -> Result<f64> {
    let mut acc = log_joint_interval(prior, sigma, y, f64::NEG_INFINITY, f64::INFINITY)?;
    for (at, mass) in prior.atoms() {
        acc = log_add_exp(acc, log_atom_term(sigma, y, at, mass));
    }
    Ok(acc)
}

pub fn marginal_density(prior: &Prior, sigma: f64, y: f64) -> Result<f64> {
    Ok(log_marginal_density(prior, sigma, y)?.exp())
}

/// `log ∫ L(θ, y) π(θ) f(y | θ) dθ`, the unnormalized posterior expected loss.
pub fn log_loss_joint(prior: &Prior, sigma: f64, loss: &Loss, y: f64) -> Result<f64> {
    log_loss_joint_at(prior, sigma, loss, y, y)
}

/// As [`log_loss_joint`] with the decision taken at `decision` rather than `y`.
pub fn log_loss_joint_at(prior: &Prior, sigma: f64, loss: &Loss, y: f64, decision: f64) -> Result<f64> {
    let mut acc = f64::NEG_INFINITY;
    for iv in &loss.loss_region(decision).intervals {
        acc = log_add_exp(acc, log_joint_interval(prior, sigma, y, iv.lo, iv.hi)?);
    }
    for (at, mass) in prior.atoms() {
        if loss.value(at, decision) > 0.0 {
            acc = log_add_exp(acc, log_atom_term(sigma, y, at, mass));
        }
    }
    Ok(acc)
}

/// Posterior expected loss `ρ̃(y)` of a discovery at `y` under the random-effect
/// posterior, where selection cancels.
pub fn posterior_risk(prior: &Prior, lik: &Likelihood, loss: &Loss, y: f64) -> Result<f64> {
    let sigma = lik.sigma()?;
    let num = log_loss_joint(prior, sigma, loss, y)?;
    let den = log_marginal_density(prior, sigma, y)?;
    if !den.is_finite() {
        return Err(Error::Numeric(format!("marginal density underflows at y = {y}")));
    }
    Ok((num - den).exp().clamp(0.0, 1.0))
}

/// Density of `y` under the truncated random-effect model, `m(y) / Pr(S)` on S.
pub fn truncated_marginal(prior: &Prior, lik: &Likelihood, rule: &SelectionRule, y: f64) -> Result<f64> {
    prior.validate()?;
    let sigma = lik.sigma()?;
    let region = resolve_region(rule, prior, lik)?;
    if !region.contains(y) {
        return Err(Error::Precondition(format!("observation {y} is not selected by rule {rule}")));
    }
    let ps = crate::model::expect::marginal_region_probability(&region, sigma, prior)?;
    if !(ps > 0.0) {
        return Err(Error::DegenerateRule(format!("rule {rule} has zero selection probability")));
    }
    Ok(marginal_density(prior, sigma, y)? / ps)
}

/// Range of `y` outside of which the marginal density is negligible.
pub(crate) fn marginal_extent(prior: &Prior, sigma: f64) -> (f64, f64) {
    let mut breaks = prior.support_breaks();
    breaks.extend(prior.atoms().into_iter().map(|a| a.0));
    let lo = breaks.iter().cloned().fold(0.0, f64::min);
    let hi = breaks.iter().cloned().fold(0.0, f64::max);
    (lo - 40.0 * sigma, hi + 40.0 * sigma)
}

/// Breakpoints of `y ↦ m(y)` worth aligning a grid to.
pub(crate) fn marginal_breaks(prior: &Prior) -> Vec<f64> {
    let mut b = prior.support_breaks();
    b.extend(prior.atoms().into_iter().map(|a| a.0));
    b
}
