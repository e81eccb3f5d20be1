use serde::Serialize;

use super::grid::{PosteriorGrid, Summary};
use crate::error::{Error, Result};
use crate::model::EffectKind;
use crate::numerics::quadrature::{Grid, Scheme};
use crate::numerics::special::normal_cdf;

/// Two compounds with a shared hyperparameter:
/// `λ ~ N(0, 1 − γ²)`, `μᵢ | λ ~ N(λ, γ²)`, `yᵢ | μᵢ ~ N(μᵢ, v)`, reported only
/// when `y₂ ≥ y₁`.
#[derive(Debug, Clone, Serialize)]
pub struct CompoundSetup {
    pub hyper_var: f64,
    pub y: (f64, f64),
    pub sampling_var: f64,
    pub nodes: usize,
    /// Half-width of the tensor grid in prior standard deviations.
    pub halfwidth_sds: f64,
    pub level: f64,
}

impl CompoundSetup {
    pub fn new(hyper_var: f64, y: (f64, f64), sampling_var: f64) -> Self {
        CompoundSetup { hyper_var, y, sampling_var, nodes: 801, halfwidth_sds: 8.0, level: 0.95 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompoundPosterior {
    pub kind: String,
    pub mean_mu1: f64,
    /// Posterior summary of the selected (larger) compound's effect μ₂.
    pub mu2: Summary,
}

/// Posterior of μ₂ after selecting the compound with the larger estimate.
///
/// Random: `π(μ₁, μ₂) f(y | μ)`. Mixed (λ fixed, μ redrawn): weights each λ by
/// `1 / Pr(S | λ)`, which is constant here so the result equals Random.
/// Fixed: divides the random-effect integrand by `Pr(Y₂ ≥ Y₁ | μ) =
/// Φ((μ₂ − μ₁)/√(2v))`.
pub fn compound_selection_posterior(setup: &CompoundSetup, kind: &EffectKind) -> Result<CompoundPosterior> {
    let g2 = setup.hyper_var;
    let v = setup.sampling_var;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("sampling variance must be positive, got {v}")));
    }
    if !(0.0..=1.0).contains(&g2) {
        return Err(Error::Domain(format!("hyper variance must lie in [0, 1], got {g2}")));
    }
    let (y1, y2) = setup.y;
    if y2 < y1 {
        return Err(Error::Precondition("the second compound must have the larger estimate".into()));
    }
    let rho = 1.0 - g2;
    let sd_lik = v.sqrt();
    let diff_sd = (2.0 * v).sqrt();
    let w = setup.halfwidth_sds;
    let grid = Grid::segmented(&[-w, w], setup.nodes, Scheme::Trapezoid)?;
    let nodes = grid.nodes();
    let weights = grid.weights();

    // With γ² = 0 both effects equal λ and selection is uninformative for
    // every kind: a one-dimensional problem.
    if g2 == 0.0 {
        let dens: Vec<f64> = nodes
            .iter()
            .map(|&l| {
                let a = (y1 - l) / sd_lik;
                let b = (y2 - l) / sd_lik;
                (-0.5 * (l * l + a * a + b * b)).exp()
            })
            .collect();
        let post = PosteriorGrid::from_unnormalized(grid.clone(), dens, vec![], 0.0, vec![])?;
        return Ok(CompoundPosterior { kind: kind.name().into(), mean_mu1: post.mean(), mu2: post.summarize(setup.level)? });
    }

    let det = 1.0 - rho * rho;
    let log_prior = |m1: f64, m2: f64| -0.5 * (m1 * m1 - 2.0 * rho * m1 * m2 + m2 * m2) / det;
    let log_lik = |m1: f64, m2: f64| {
        let a = (y1 - m1) / sd_lik;
        let b = (y2 - m2) / sd_lik;
        -0.5 * (a * a + b * b)
    };
    // Pr(Y₂ ≥ Y₁ | λ): Y₂ − Y₁ | λ is centred at zero whatever λ is.
    let pr_s_given_lambda = 0.5;

    let weight = |m1: f64, m2: f64| -> f64 {
        let base = log_prior(m1, m2) + log_lik(m1, m2);
        match kind {
            EffectKind::Random => base.exp(),
            EffectKind::Mixed { .. } => base.exp() / pr_s_given_lambda,
            EffectKind::Fixed => base.exp() / normal_cdf((m2 - m1) / diff_sd),
        }
    };

    let n = nodes.len();
    let mut marg2 = vec![0.0; n];
    let mut m1_acc = 0.0;
    let mut total = 0.0;
    for (i, &m1) in nodes.iter().enumerate() {
        for (j, &m2) in nodes.iter().enumerate() {
            let val = weight(m1, m2) * weights[i];
            marg2[j] += val;
            m1_acc += m1 * val * weights[j];
            total += val * weights[j];
        }
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numeric(format!("two-dimensional normalization is {total}")));
    }
    let post = PosteriorGrid::from_unnormalized(grid, marg2, vec![], 0.0, vec![])?;
    Ok(CompoundPosterior {
        kind: kind.name().into(),
        mean_mu1: m1_acc / total,
        mu2: post.summarize(setup.level)?,
    })
}
