//! Closed forms shared by the gene-level posterior, risk and fit routines.
//!
//! Given `s²`, the conditional law of `σ²` is `ν s̃²/χ²(ν)` with
//! `ν = ν₀ + df`, so expectations over σ² reduce to a fixed set of
//! χ²(ν) nodes rescaled by `s̃²`.

use crate::error::Result;
use crate::model::rule::ChiSquareNodes;
use crate::model::Prior;
use crate::numerics::special::{ln_gamma, log_add_exp};
use crate::risk::log_joint_interval;

use super::fit::EbayesFit;

pub const CONDITIONAL_NODES: usize = 81;

#[derive(Debug, Clone)]
pub(crate) struct ConditionalNodes {
    /// χ²(ν) abscissae.
    x: Vec<f64>,
    logw: Vec<f64>,
    nu: f64,
}

impl ConditionalNodes {
    pub(crate) fn new(nu: f64, n: usize) -> Result<Self> {
        let c = ChiSquareNodes::new(nu, n)?;
        let keep: Vec<(f64, f64)> = c.x.iter().zip(&c.w).filter(|(x, w)| **x > 0.0 && **w > 0.0).map(|(x, w)| (*x, w.ln())).collect();
        let (x, logw) = keep.into_iter().unzip();
        Ok(ConditionalNodes { x, logw, nu })
    }

    /// `log p(ȳ | s²)` and `log p(ȳ, μ on the wrong side of 0 | s²)`.
    pub(crate) fn log_parts(&self, rate: f64, ybar: f64, st2: f64, n: u32) -> (f64, f64) {
        let prior = Prior::Laplace { rate };
        let (mut all, mut wrong) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (&x, &lw) in self.x.iter().zip(&self.logw) {
            let tau = (self.nu * st2 / (x * n as f64)).sqrt();
            let neg = log_joint_interval(&prior, tau, ybar, f64::NEG_INFINITY, 0.0).unwrap_or(f64::NEG_INFINITY);
            let pos = log_joint_interval(&prior, tau, ybar, 0.0, f64::INFINITY).unwrap_or(f64::NEG_INFINITY);
            all = log_add_exp(all, lw + log_add_exp(neg, pos));
            wrong = log_add_exp(wrong, lw + if ybar >= 0.0 { neg } else { pos });
        }
        (all, wrong)
    }
}

/// `ρ̃(ȳ, s²) = Pr(sign μ ≠ sign ȳ | ȳ, s²)` under the Laplace effect prior;
/// one half at `ȳ = 0`.
pub fn sign_error_probability(fit: &EbayesFit, ybar: f64, s2: f64, n: u32, df: f64) -> Result<f64> {
    if ybar == 0.0 {
        return Ok(0.5);
    }
    let nodes = ConditionalNodes::new(fit.nu0 + df, CONDITIONAL_NODES)?;
    let (all, wrong) = nodes.log_parts(fit.laplace_rate, ybar, fit.moderated_variance(s2, df), n);
    Ok((wrong - all).exp().clamp(0.0, 1.0))
}

/// Log density of `v = log s²`: `s²/s₀²` follows an `F(df, ν₀)` law.
pub(crate) fn log_density_log_s2(fit: &EbayesFit, df: f64, v: f64) -> f64 {
    let (a, b) = (0.5 * df, 0.5 * fit.nu0);
    let x = v.exp() / fit.s0sq;
    let r = df / fit.nu0;
    // x·f_F(x) in log form
    a * (r * x).ln() - (a + b) * (r * x).ln_1p() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}
