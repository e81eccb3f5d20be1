use super::fit::EbayesFit;
use super::kernel::sign_error_probability;
use super::records::GeneRecord;
use crate::error::{Error, Result};
use crate::model::rule::ChiSquareNodes;
use crate::model::{Direction, Loss, SelectionRule, Statistic};

/// Node counts of the nested quadrature for `Pr(S | μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionQuadrature {
    /// Nodes for σ² against its scaled-inverse-χ² prior.
    pub sigma_nodes: usize,
    /// Nodes for s² against `σ²χ²(df)/df`.
    pub s2_nodes: usize,
}

impl Default for SelectionQuadrature {
    fn default() -> Self {
        SelectionQuadrature { sigma_nodes: 121, s2_nodes: 201 }
    }
}

impl SelectionQuadrature {
    pub fn doubled(&self) -> Self {
        SelectionQuadrature { sigma_nodes: 2 * self.sigma_nodes - 1, s2_nodes: 2 * self.s2_nodes - 1 }
    }
}

/// Largest change allowed when the quadrature is doubled.
pub const DOUBLING_TOLERANCE: f64 = 1e-4;

/// Precomputed nodes for repeated evaluation of `Pr(S | μ)`.
pub(crate) struct SelectionIntegrator {
    sigma2: Vec<f64>,
    w: Vec<f64>,
    inner: ChiSquareNodes,
    n: u32,
    df: f64,
    stat: (f64, f64),
    cutoff: f64,
    direction: Direction,
}

impl SelectionIntegrator {
    pub(crate) fn new(rule: &SelectionRule, fit: &EbayesFit, n: u32, df: f64, q: SelectionQuadrature) -> Result<Self> {
        let SelectionRule::StatThreshold { stat: Statistic::ModeratedT { nu0, s0sq }, s, direction } = rule else {
            return Err(Error::Unsupported(format!("Pr(S | mu) needs a moderated t threshold rule, got {rule}")));
        };
        let outer = ChiSquareNodes::new(fit.nu0, q.sigma_nodes)?;
        let (sigma2, w): (Vec<f64>, Vec<f64>) = outer
            .x
            .iter()
            .zip(&outer.w)
            .filter(|(x, w)| **x > 0.0 && **w > 0.0)
            .map(|(x, w)| (fit.nu0 * fit.s0sq / x, *w))
            .unzip();
        Ok(SelectionIntegrator {
            sigma2,
            w,
            inner: ChiSquareNodes::new(df, q.s2_nodes)?,
            n,
            df,
            stat: (*nu0, *s0sq),
            cutoff: *s,
            direction: *direction,
        })
    }

    pub(crate) fn prob(&self, mu: f64) -> f64 {
        let mut acc = 0.0;
        for (&s2, &w) in self.sigma2.iter().zip(&self.w) {
            acc += w * self.inner.moderated_t_selection(mu, s2, self.n, self.df, self.stat.0, self.stat.1, self.cutoff, self.direction);
        }
        acc.clamp(0.0, 1.0)
    }
}

/// `Pr(S | μ)` for a moderated-t threshold rule, with `σ²` integrated over
/// its prior and `s²` over its sampling law. Fails when doubling the node
/// counts changes the result by more than [`DOUBLING_TOLERANCE`].
pub fn selection_prob_mu(rule: &SelectionRule, fit: &EbayesFit, n: u32, df: f64, mu: f64) -> Result<f64> {
    fit.validate()?;
    let q = SelectionQuadrature::default();
    let base = SelectionIntegrator::new(rule, fit, n, df, q)?.prob(mu);
    let fine = SelectionIntegrator::new(rule, fit, n, df, q.doubled())?.prob(mu);
    if (base - fine).abs() > DOUBLING_TOLERANCE {
        return Err(Error::Numeric(format!(
            "selection probability at mu = {mu} changes from {base} to {fine} when the quadrature is doubled"
        )));
    }
    Ok(fine)
}

/// Whether a gene passes `rule`. Loss thresholds use the directional
/// posterior risk `ρ̃(ȳ, s²)` under the fitted prior.
pub fn passes(rule: &SelectionRule, rec: &GeneRecord, fit: &EbayesFit) -> Result<bool> {
    match rule {
        SelectionRule::All => Ok(true),
        SelectionRule::StatThreshold { stat: Statistic::ModeratedT { .. }, .. } => {
            rule.contains_mean_var(&crate::model::Likelihood::MeanAndVariance { n: rec.n, df: rec.df }, rec.ybar, rec.s2)
        }
        SelectionRule::LossThreshold { loss: Loss::Directional, s } => {
            Ok(sign_error_probability(fit, rec.ybar, rec.s2, rec.n, rec.df)? <= *s)
        }
        other => Err(Error::Unsupported(format!("rule {other} does not apply to gene summaries"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microarray::moderated_t_rule;
    use crate::numerics::special::t_sf;
    use crate::numerics::RngStream;
    use rand::Rng;
    use rand_distr::{ChiSquared, Distribution, StandardNormal};

    #[test]
    fn null_selection_probability_is_a_t_tail() {
        let fit = EbayesFit::swirl();
        let rule = moderated_t_rule(&fit, 4.479, Direction::TwoSided);
        let p = selection_prob_mu(&rule, &fit, 4, 3.0, 0.0).unwrap();
        let expect = 2.0 * t_sf(4.479, 7.02).unwrap();
        assert!((p - expect).abs() < 1e-4, "{p} vs {expect}");
    }

    #[test]
    fn large_effects_are_always_selected() {
        let fit = EbayesFit::swirl();
        let rule = moderated_t_rule(&fit, 4.479, Direction::TwoSided);
        assert!(selection_prob_mu(&rule, &fit, 4, 3.0, 5.0).unwrap() >= 0.999);
    }

    #[test]
    fn matches_simulation() {
        let fit = EbayesFit::swirl();
        let rule = moderated_t_rule(&fit, 4.479, Direction::TwoSided);
        let mu = -0.435;
        let p = selection_prob_mu(&rule, &fit, 4, 3.0, mu).unwrap();
        let mut rng = RngStream::new(8, 0);
        let (prior_chi, s_chi) = (ChiSquared::new(fit.nu0).unwrap(), ChiSquared::new(3.0).unwrap());
        let draws = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..draws {
            let sigma2 = fit.nu0 * fit.s0sq / prior_chi.sample(rng.rng());
            let s2 = sigma2 * s_chi.sample(rng.rng()) / 3.0;
            let z: f64 = rng.sample(StandardNormal);
            let ybar = mu + (sigma2 / 4.0).sqrt() * z;
            let t = ybar / (fit.moderated_variance(s2, 3.0) / 4.0).sqrt();
            if t.abs() >= 4.479 {
                hits += 1;
            }
        }
        let phat = hits as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((phat - p).abs() < 3.0 * se, "{phat} vs {p}");
    }

    #[test]
    fn other_rules_are_unsupported() {
        let fit = EbayesFit::swirl();
        assert!(selection_prob_mu(&SelectionRule::TwoSided { a: 1.0 }, &fit, 4, 3.0, 0.0).is_err());
    }
}
