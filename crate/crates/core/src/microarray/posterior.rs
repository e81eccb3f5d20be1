use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::EbayesFit;
use super::records::GeneRecord;
use super::selection::{passes, SelectionIntegrator, SelectionQuadrature, DOUBLING_TOLERANCE};
use crate::error::{Error, Result, Tail};
use crate::model::SelectionRule;
use crate::numerics::quadrature::{Grid, Scheme};
use crate::posterior::PosteriorGrid;

/// Prior on the gene effect μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "prior")]
pub enum EffectPrior {
    /// Non-informative; with a rule the effect is treated as fixed.
    Flat,
    /// `rate·exp(−rate|μ|)/2`; with a rule the effect is treated as random.
    Laplace { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenePosteriorOptions {
    pub nodes: usize,
    /// Half-width of the μ grid in posterior scale units `s̃/√n`.
    pub halfwidth_scales: f64,
    /// The density at both ends must be this far (log scale) below its peak.
    pub tail_log_drop: f64,
    /// Evenly spaced points at which `Pr(S | μ)` is computed; the grid
    /// nodes use cubic interpolation of its logarithm between them.
    pub selection_points: usize,
    /// Every this many of those points the selection probability is
    /// recomputed with doubled quadrature as a convergence check.
    pub doubling_stride: usize,
}

impl Default for GenePosteriorOptions {
    fn default() -> Self {
        GenePosteriorOptions { nodes: 2001, halfwidth_scales: 60.0, tail_log_drop: 18.0, selection_points: 481, doubling_stride: 24 }
    }
}

/// Log of the t kernel `[ν₀s₀² + df·s² + n(μ − ȳ)²]^{−(ν₀+df+1)/2}`, the
/// likelihood of μ after integrating σ² against its prior.
pub fn log_t_kernel(rec: &GeneRecord, fit: &EbayesFit, mu: f64) -> f64 {
    let b = fit.nu0 * fit.s0sq + rec.df * rec.s2 + rec.n as f64 * (mu - rec.ybar).powi(2);
    -0.5 * (fit.nu0 + rec.df + 1.0) * b.ln()
}

/// Posterior of μ for one gene.
///
/// Without a rule (or with the Laplace prior, where selection cancels) this
/// is `prior(μ)` times the t kernel. With a rule and the flat prior the
/// kernel is divided by `Pr(S | μ)`.
pub fn gene_posterior(
    rec: &GeneRecord,
    fit: &EbayesFit,
    rule: Option<&SelectionRule>,
    prior: &EffectPrior,
) -> Result<PosteriorGrid> {
    gene_posterior_with(rec, fit, rule, prior, &GenePosteriorOptions::default())
}

pub fn gene_posterior_with(
    rec: &GeneRecord,
    fit: &EbayesFit,
    rule: Option<&SelectionRule>,
    prior: &EffectPrior,
    opts: &GenePosteriorOptions,
) -> Result<PosteriorGrid> {
    rec.validate()?;
    fit.validate()?;
    if let EffectPrior::Laplace { rate } = prior {
        if !(rate.is_finite() && *rate > 0.0) {
            return Err(Error::Config(format!("Laplace rate must be positive, got {rate}")));
        }
    }
    if let Some(r) = rule {
        if !passes(r, rec, fit)? {
            return Err(Error::Precondition(format!("gene {} does not pass the rule {r}", rec.id)));
        }
    }
    let adjust = match (rule, prior) {
        (Some(r), EffectPrior::Flat) if *r != SelectionRule::All => {
            Some(SelectionIntegrator::new(r, fit, rec.n, rec.df, SelectionQuadrature::default())?)
        }
        _ => None,
    };
    let scale = (fit.moderated_variance(rec.s2, rec.df) / rec.n as f64).sqrt();
    let lo = rec.ybar.min(0.0) - opts.halfwidth_scales * scale;
    let hi = rec.ybar.max(0.0) + opts.halfwidth_scales * scale;
    let grid = Grid::with_breaks(lo, hi, &[0.0, rec.ybar], opts.nodes, Scheme::Simpson)?;
    let log_sel = match (&adjust, rule) {
        (Some(sel), Some(r)) => {
            let k = opts.selection_points.max(4);
            let h = (hi - lo) / (k - 1) as f64;
            let pts: Vec<f64> = (0..k).map(|i| lo + h * i as f64).collect();
            let vals: Vec<f64> = pts.par_iter().map(|&mu| sel.prob(mu).ln()).collect();
            let fine = SelectionIntegrator::new(r, fit, rec.n, rec.df, SelectionQuadrature::default().doubled())?;
            for (&mu, &lv) in pts.iter().zip(&vals).step_by(opts.doubling_stride.max(1)) {
                let (a, b) = (lv.exp(), fine.prob(mu));
                if (a - b).abs() > DOUBLING_TOLERANCE {
                    return Err(Error::Numeric(format!("Pr(S | mu = {mu}) changes from {a} to {b} on doubling")));
                }
            }
            Some((lo, h, vals))
        }
        _ => None,
    };
    let logs: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&mu| {
            let mut l = log_t_kernel(rec, fit, mu);
            if let EffectPrior::Laplace { rate } = prior {
                l += (0.5 * rate).ln() - rate * mu.abs();
            }
            if let Some((start, h, vals)) = &log_sel {
                l -= catmull_rom(*start, *h, vals, mu);
            }
            l
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numeric("posterior log density has no finite maximum".into()));
    }
    for (tail, l) in [(Tail::Lower, logs[0]), (Tail::Upper, logs[logs.len() - 1])] {
        if l > top - opts.tail_log_drop {
            return Err(Error::ImproperPosterior {
                tail,
                detail: format!("density is within e^-{} of its peak at the grid edge", opts.tail_log_drop),
            });
        }
    }
    let values: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let cusps = if matches!(prior, EffectPrior::Laplace { .. }) { vec![0.0] } else { vec![] };
    PosteriorGrid::from_unnormalized(grid, values, vec![], top, cusps)
}

/// Cubic Catmull-Rom interpolation of evenly spaced samples.
fn catmull_rom(start: f64, h: f64, v: &[f64], x: f64) -> f64 {
    let n = v.len();
    let u = ((x - start) / h).clamp(0.0, (n - 1) as f64);
    let i = (u.floor() as usize).min(n - 2);
    let t = u - i as f64;
    let p1 = v[i];
    let p2 = v[i + 1];
    let p0 = if i > 0 { v[i - 1] } else { 2.0 * p1 - p2 };
    let p3 = if i + 2 < n { v[i + 2] } else { 2.0 * p2 - p1 };
    let (t2, t3) = (t * t, t * t * t);
    0.5 * (2.0 * p1 + (p2 - p0) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
}
