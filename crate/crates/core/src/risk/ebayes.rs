use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::marginal::log_marginal_density;
use crate::error::{Error, Result};
use crate::model::{Likelihood, Prior};
use crate::numerics::optimize::golden_max;

/// Parametric prior families fitted by maximum marginal likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorFamily {
    /// `N(μ, τ²)`; closed-form fit.
    Normal,
    /// `Laplace(rate)`; one-dimensional search over the log rate.
    Laplace,
    /// `w·Laplace(r₁) + (1 − w)·Laplace(r₂)` with fixed rates; search over `w`.
    LaplaceMixture { rates: [f64; 2] },
    /// `π₀ δ₀ + (1 − π₀) N(0, τ²)`; coordinate search over `(π₀, log τ²)`.
    TwoGroupNormal,
}

#[derive(Debug, Clone, Serialize)]
pub struct PriorFit {
    pub family: PriorFamily,
    pub prior: Prior,
    pub log_likelihood: f64,
    pub n: usize,
}

/// `Σ log m(yᵢ)`; the terms are summed in index order.
pub fn marginal_log_likelihood(prior: &Prior, lik: &Likelihood, ys: &[f64]) -> Result<f64> {
    let sigma = lik.sigma()?;
    let terms: Vec<f64> = ys.par_iter().map(|&y| log_marginal_density(prior, sigma, y)).collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

const SEARCH_TOL: f64 = 1e-7;

/// Fit `family` to the observations `ys` by maximizing the marginal likelihood.
pub fn fit_prior(family: &PriorFamily, lik: &Likelihood, ys: &[f64]) -> Result<PriorFit> {
    if ys.len() < 2 {
        return Err(Error::FitFailure("need at least two observations to fit a prior".into()));
    }
    if let Some(y) = ys.iter().find(|y| !y.is_finite()) {
        return Err(Error::FitFailure(format!("non-finite observation {y}")));
    }
    let sigma = lik.sigma()?;
    let ll = |p: &Prior| marginal_log_likelihood(p, lik, ys).unwrap_or(f64::NEG_INFINITY);
    let prior = match family {
        PriorFamily::Normal => {
            let n = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / n;
            let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
            let tau2 = var - sigma * sigma;
            if tau2 <= 0.0 {
                return Err(Error::FitFailure(format!(
                    "sample variance {var} does not exceed the noise variance; the prior variance is not identified"
                )));
            }
            Prior::normal(mean, tau2)?
        }
        PriorFamily::Laplace => {
            let (lr, _) = golden_max(|lr| ll(&Prior::Laplace { rate: lr.exp() }), -8.0, 8.0, SEARCH_TOL)?;
            Prior::laplace(lr.exp())?
        }
        PriorFamily::LaplaceMixture { rates } => {
            let mk = |w: f64| Prior::Mixture {
                components: vec![
                    crate::model::Component { weight: w, prior: Prior::Laplace { rate: rates[0] } },
                    crate::model::Component { weight: 1.0 - w, prior: Prior::Laplace { rate: rates[1] } },
                ],
            };
            let (w, _) = golden_max(|w| ll(&mk(w)), 0.0, 1.0, SEARCH_TOL)?;
            let p = mk(w);
            p.validate()?;
            p
        }
        PriorFamily::TwoGroupNormal => {
            let mk = |pi0: f64, lt: f64| Prior::TwoGroup { pi0, alt: Box::new(Prior::Normal { mean: 0.0, var: lt.exp() }) };
            let (mut pi0, mut lt) = (0.5, 0.0);
            let mut best = ll(&mk(pi0, lt));
            for _ in 0..50 {
                lt = golden_max(|l| ll(&mk(pi0, l)), -8.0, 8.0, SEARCH_TOL)?.0;
                let (p, v) = golden_max(|p| ll(&mk(p, lt)), 0.0, 1.0 - 1e-12, SEARCH_TOL)?;
                pi0 = p;
                let converged = (v - best).abs() <= 1e-9 * v.abs().max(1.0);
                best = v;
                if converged {
                    break;
                }
            }
            mk(pi0, lt)
        }
    };
    let log_likelihood = ll(&prior);
    if !log_likelihood.is_finite() {
        return Err(Error::FitFailure("marginal likelihood is not finite at the fitted prior".into()));
    }
    Ok(PriorFit { family: family.clone(), prior, log_likelihood, n: ys.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn draws(prior: &Prior, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n)
            .map(|_| {
                let t = prior.sample(&mut rng).unwrap();
                t + crate::numerics::normal_quantile(rng.uniform_open()).unwrap()
            })
            .collect()
    }

    #[test]
    fn recovers_laplace_rate() {
        let ys = draws(&Prior::laplace(0.5).unwrap(), 20_000, 5);
        let fit = fit_prior(&PriorFamily::Laplace, &Likelihood::standard(), &ys).unwrap();
        let Prior::Laplace { rate } = fit.prior else { panic!() };
        assert!((rate - 0.5).abs() < 0.03, "{rate}");
    }

    #[test]
    fn recovers_mixture_weight() {
        let ys = draws(&Prior::example_mixture(), 50_000, 9);
        let fit = fit_prior(&PriorFamily::LaplaceMixture { rates: [10.0, 1.0] }, &Likelihood::standard(), &ys).unwrap();
        let Prior::Mixture { components } = &fit.prior else { panic!() };
        assert!((components[0].weight - 0.9).abs() < 0.02, "{}", components[0].weight);
    }

    #[test]
    fn normal_fit_is_moment_based() {
        let ys = draws(&Prior::normal(1.0, 4.0).unwrap(), 20_000, 1);
        let fit = fit_prior(&PriorFamily::Normal, &Likelihood::standard(), &ys).unwrap();
        let Prior::Normal { mean, var } = fit.prior else { panic!() };
        assert!((mean - 1.0).abs() < 0.05 && (var - 4.0).abs() < 0.2);
        assert!(fit_prior(&PriorFamily::Normal, &Likelihood::standard(), &[0.1, -0.1, 0.05]).is_err());
    }

    #[test]
    fn two_group_fit_finds_null_fraction() {
        let truth = Prior::two_group(0.8, Prior::normal(0.0, 9.0).unwrap()).unwrap();
        let ys = draws(&truth, 20_000, 3);
        let fit = fit_prior(&PriorFamily::TwoGroupNormal, &Likelihood::standard(), &ys).unwrap();
        let Prior::TwoGroup { pi0, .. } = fit.prior else { panic!() };
        assert!((pi0 - 0.8).abs() < 0.03, "{pi0}");
    }
}
