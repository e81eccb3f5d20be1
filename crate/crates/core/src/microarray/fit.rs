use serde::{Deserialize, Serialize};

use super::kernel::{ConditionalNodes, CONDITIONAL_NODES};
use super::records::GeneRecord;
use crate::error::{Error, Result};
use crate::numerics::optimize::golden_max;
use crate::numerics::roots::find_root;
use crate::numerics::special::{digamma, trigamma};

/// Hyperparameters of the two-level gene model: `σ² ~ ν₀s₀²/χ²(ν₀)` and
/// `μ ~ Laplace(laplace_rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbayesFit {
    pub nu0: f64,
    pub s0sq: f64,
    pub laplace_rate: f64,
}

/// Default rate of the Laplace effect prior.
pub const DEFAULT_LAPLACE_RATE: f64 = 8.5;

impl EbayesFit {
    pub fn new(nu0: f64, s0sq: f64, laplace_rate: f64) -> Result<Self> {
        let f = EbayesFit { nu0, s0sq, laplace_rate };
        f.validate()?;
        Ok(f)
    }

    /// Hyperparameters reported for the swirl zebrafish arrays.
    pub fn swirl() -> Self {
        EbayesFit { nu0: 4.02, s0sq: 0.052, laplace_rate: DEFAULT_LAPLACE_RATE }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu0", self.nu0), ("s0sq", self.s0sq), ("laplace_rate", self.laplace_rate)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `s̃² = (ν₀s₀² + df·s²)/(ν₀ + df)`.
    pub fn moderated_variance(&self, s2: f64, df: f64) -> f64 {
        (self.nu0 * self.s0sq + df * s2) / (self.nu0 + df)
    }
}

/// Fewest records for which the variance prior is fitted.
pub const MIN_FIT_RECORDS: usize = 10;

/// `(ν₀, s₀²)` of the scaled-inverse-χ² variance prior.
///
/// With `override_` the values pass through. Otherwise the first two moments
/// of `log s²` are matched: `E log s² = log s₀² + ψ(df/2) − log(df/2) −
/// ψ(ν₀/2) + log(ν₀/2)` and `Var log s² = ψ′(df/2) + ψ′(ν₀/2)`, solved for
/// `ν₀` by bisection on the trigamma equation.
pub fn fit_variance_prior(records: &[GeneRecord], override_: Option<(f64, f64)>) -> Result<(f64, f64)> {
    if let Some((nu0, s0sq)) = override_ {
        if !(nu0 > 0.0 && s0sq > 0.0 && nu0.is_finite() && s0sq.is_finite()) {
            return Err(Error::Config(format!("override needs positive nu0 and s0sq, got ({nu0}, {s0sq})")));
        }
        return Ok((nu0, s0sq));
    }
    if records.len() < MIN_FIT_RECORDS {
        return Err(Error::FitFailure(format!(
            "{} records; at least {MIN_FIT_RECORDS} are needed to fit the variance prior",
            records.len()
        )));
    }
    let mut e = Vec::with_capacity(records.len());
    let mut tri_df = 0.0;
    for r in records {
        if !(r.s2 > 0.0) {
            return Err(Error::FitFailure(format!("gene {} has zero variance; supply nu0 and s0sq explicitly", r.id)));
        }
        let h = 0.5 * r.df;
        e.push(r.s2.ln() - digamma(h) + h.ln());
        tri_df += trigamma(h);
    }
    let n = e.len() as f64;
    tri_df /= n;
    let mean = e.iter().sum::<f64>() / n;
    let var = e.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let target = var - tri_df;
    if !(target > 1e-8) {
        return Err(Error::FitFailure(format!(
            "log variances are no more dispersed than sampling noise alone (excess {target:e}); the prior degrees of freedom are unbounded, supply nu0 and s0sq explicitly"
        )));
    }
    // trigamma is decreasing; solve ψ′(h) = target for h = ν₀/2 on a log scale.
    let g = |lh: f64| trigamma(lh.exp()) - target;
    let (lo, hi) = (-20.0_f64, 20.0_f64);
    if g(hi) > 0.0 {
        return Err(Error::FitFailure("prior degrees of freedom beyond the search range".into()));
    }
    let h = find_root(g, lo, hi, 1e-12)?.exp();
    let nu0 = 2.0 * h;
    let s0sq = (mean + digamma(h) - h.ln()).exp();
    Ok((nu0, s0sq))
}

/// Maximum marginal-likelihood rate of the Laplace effect prior given
/// `(ν₀, s₀²)`: maximizes `Σ_g log p(ȳ_g | s²_g)`.
pub fn fit_laplace_rate(records: &[GeneRecord], nu0: f64, s0sq: f64) -> Result<f64> {
    if records.len() < MIN_FIT_RECORDS {
        return Err(Error::FitFailure(format!("{} records are too few to fit the effect prior", records.len())));
    }
    let df = records[0].df;
    if records.iter().any(|r| r.df != df) {
        return Err(Error::Unsupported("fitting the effect prior needs a common df".into()));
    }
    let nodes = ConditionalNodes::new(nu0 + df, CONDITIONAL_NODES)?;
    let ll = |lr: f64| -> f64 {
        let fit = EbayesFit { nu0, s0sq, laplace_rate: lr.exp() };
        records
            .iter()
            .map(|r| nodes.log_parts(fit.laplace_rate, r.ybar, fit.moderated_variance(r.s2, df), r.n).0)
            .sum()
    };
    let (lr, best) = golden_max(ll, -5.0, 8.0, 1e-8)?;
    if !best.is_finite() {
        return Err(Error::FitFailure("marginal likelihood is not finite".into()));
    }
    if lr > 8.0 - 1e-3 || lr < -5.0 + 1e-3 {
        return Err(Error::FitFailure(format!("Laplace rate {} is at the edge of the search range", lr.exp())));
    }
    Ok(lr.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Prior;
    use crate::numerics::RngStream;
    use rand::Rng;
    use rand_distr::{ChiSquared, Distribution, StandardNormal};

    pub(crate) fn synthetic(m: usize, nu0: f64, s0sq: f64, rate: Option<f64>, seed: u64) -> Vec<GeneRecord> {
        let mut rng = RngStream::new(seed, 0);
        let prior = Prior::ScaledInvChiSq { nu0, s0sq };
        let chi = ChiSquared::new(3.0).unwrap();
        (0..m)
            .map(|i| {
                let sigma2 = prior.sample(&mut rng).unwrap();
                let s2 = sigma2 * chi.sample(rng.rng()) / 3.0;
                let ybar = match rate {
                    Some(r) => {
                        let mu = Prior::Laplace { rate: r }.sample(&mut rng).unwrap();
                        let z: f64 = rng.sample(StandardNormal);
                        mu + (sigma2 / 4.0).sqrt() * z
                    }
                    None => 0.0,
                };
                GeneRecord::new(format!("g{i}"), ybar, s2)
            })
            .collect()
    }

    #[test]
    fn override_passes_through() {
        assert_eq!(fit_variance_prior(&[], Some((4.02, 0.052))).unwrap(), (4.02, 0.052));
        assert!(fit_variance_prior(&[], Some((0.0, 0.052))).is_err());
    }

    #[test]
    fn recovers_synthetic_hyperparameters() {
        let recs = synthetic(100_000, 4.02, 0.052, None, 17);
        let (nu0, s0sq) = fit_variance_prior(&recs, None).unwrap();
        assert!((nu0 - 4.02).abs() < 0.3, "{nu0}");
        assert!((s0sq / 0.052 - 1.0).abs() < 0.1, "{s0sq}");
    }

    #[test]
    fn recovers_laplace_rate() {
        let recs = synthetic(20_000, 4.02, 0.052, Some(8.5), 23);
        let rate = fit_laplace_rate(&recs, 4.02, 0.052).unwrap();
        assert!((rate / 8.5 - 1.0).abs() < 0.05, "{rate}");
    }

    #[test]
    fn identical_variances_fail() {
        let recs: Vec<GeneRecord> = (0..50).map(|i| GeneRecord::new(format!("g{i}"), 0.0, 0.05)).collect();
        assert!(matches!(fit_variance_prior(&recs, None), Err(Error::FitFailure(_))));
        assert!(matches!(fit_variance_prior(&recs[..3], None), Err(Error::FitFailure(_))));
    }
}
