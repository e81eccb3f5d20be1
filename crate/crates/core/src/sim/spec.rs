use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EffectKind, Likelihood, Prior};
use crate::numerics::RngStream;

/// Units generated from one random substream.
pub const GENERATION_BLOCK: usize = 8192;

/// A run of consecutive units sharing a prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorBlock {
    pub count: usize,
    pub prior: Prior,
}

/// How `(θᵢ, yᵢ)`, `i = 1..m`, are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpec {
    pub m: usize,
    #[serde(default)]
    pub kind: EffectKind,
    pub prior: Prior,
    #[serde(default)]
    pub lik: Likelihood,
    /// Per-unit priors as consecutive blocks whose counts sum to `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub non_exchangeable: Option<Vec<PriorBlock>>,
}

impl GenerativeSpec {
    pub fn exchangeable(m: usize, prior: Prior) -> Self {
        GenerativeSpec { m, kind: EffectKind::Random, prior, lik: Likelihood::standard(), non_exchangeable: None }
    }

    /// The polygenic example: λ ∈ {10, 1} with probabilities 0.9 / 0.1 and
    /// θ | λ ~ Laplace(λ), drawn independently per unit.
    pub fn polygenic(m: usize) -> Self {
        GenerativeSpec::exchangeable(m, Prior::example_mixture())
    }

    /// Its non-exchangeable counterpart: the first 90% of units at λ = 10,
    /// the rest at λ = 1.
    pub fn polygenic_blocks(m: usize) -> Self {
        let first = (m as f64 * 0.9).round() as usize;
        GenerativeSpec {
            non_exchangeable: Some(vec![
                PriorBlock { count: first, prior: Prior::Laplace { rate: 10.0 } },
                PriorBlock { count: m - first, prior: Prior::Laplace { rate: 1.0 } },
            ]),
            ..GenerativeSpec::polygenic(m)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        self.lik.sigma()?;
        self.lik.validate()?;
        match &self.non_exchangeable {
            Some(blocks) => {
                let total: usize = blocks.iter().map(|b| b.count).sum();
                if total != self.m {
                    return Err(Error::Config(format!("per-unit prior blocks cover {total} units, expected {}", self.m)));
                }
                for b in blocks {
                    b.prior.validate()?;
                    if !b.prior.is_proper() {
                        return Err(Error::Config("cannot generate from an improper prior".into()));
                    }
                }
            }
            None => {
                if !matches!(self.kind, EffectKind::Mixed { .. }) {
                    self.prior.validate()?;
                    if !self.prior.is_proper() {
                        return Err(Error::Config("cannot generate from an improper prior".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Prior of unit `i` (the hierarchical prior is handled by [`draw_theta`]).
    pub(crate) fn prior_of(&self, i: usize) -> &Prior {
        if let Some(blocks) = &self.non_exchangeable {
            let mut start = 0;
            for b in blocks {
                if i < start + b.count {
                    return &b.prior;
                }
                start += b.count;
            }
        }
        &self.prior
    }

    /// One draw of θ for unit `i`.
    pub(crate) fn draw_theta(&self, i: usize, rng: &mut RngStream) -> Result<f64> {
        match (&self.kind, &self.non_exchangeable) {
            (EffectKind::Mixed { hyperprior, conditional }, None) => {
                let lambda = hyperprior.sample(rng)?;
                conditional.at(lambda)?.sample(rng)
            }
            _ => self.prior_of(i).sample(rng),
        }
    }
}

/// Draw `(θ, y)` for all `m` units. Units are generated in fixed blocks,
/// each from its own substream, so the output does not depend on the number
/// of worker threads.
pub fn generate(spec: &GenerativeSpec, rng: &RngStream) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let sigma = spec.lik.sigma()?;
    let n_blocks = spec.m.div_ceil(GENERATION_BLOCK);
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut r = rng.substream(b as u64);
            let lo = b * GENERATION_BLOCK;
            let hi = (lo + GENERATION_BLOCK).min(spec.m);
            let mut theta = Vec::with_capacity(hi - lo);
            let mut y = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                let t = spec.draw_theta(i, &mut r)?;
                let e: f64 = r.sample(StandardNormal);
                theta.push(t);
                y.push(t + sigma * e);
            }
            Ok((theta, y))
        })
        .collect::<Result<_>>()?;
    let mut theta = Vec::with_capacity(spec.m);
    let mut y = Vec::with_capacity(spec.m);
    for (t, v) in blocks {
        theta.extend(t);
        y.extend(v);
    }
    Ok((theta, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygenic_moments() {
        let (theta, y) = generate(&GenerativeSpec::polygenic(100_000), &RngStream::new(1, 0)).unwrap();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        assert!((1.0..=1.3).contains(&sd), "{sd}");
        let tv = theta.iter().map(|t| t * t).sum::<f64>() / n;
        assert!((tv - 0.218).abs() < 0.02, "{tv}");
    }

    #[test]
    fn pure_noise() {
        let spec = GenerativeSpec::exchangeable(50_000, Prior::PointMass { at: 0.0 });
        let (_, y) = generate(&spec, &RngStream::new(2, 0)).unwrap();
        let m = y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64;
        assert!((m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01);
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let spec = GenerativeSpec::polygenic_blocks(30_000);
        let rng = RngStream::new(11, 3);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| generate(&spec, &rng).unwrap());
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| generate(&spec, &rng).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn block_counts_must_cover_all_units() {
        let mut spec = GenerativeSpec::polygenic_blocks(1000);
        spec.m = 999;
        assert!(matches!(generate(&spec, &RngStream::new(0, 0)), Err(Error::Config(_))));
    }

    #[test]
    fn non_exchangeable_pooled_moments_match() {
        let m = 100_000;
        let a = generate(&GenerativeSpec::polygenic(m), &RngStream::new(5, 0)).unwrap().1;
        let b = generate(&GenerativeSpec::polygenic_blocks(m), &RngStream::new(6, 0)).unwrap().1;
        let second = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let fourth = |v: &[f64]| v.iter().map(|x| x.powi(4)).sum::<f64>() / v.len() as f64;
        let se = (fourth(&a) - second(&a).powi(2)).sqrt() / (m as f64).sqrt();
        assert!((second(&a) - second(&b)).abs() < 3.0 * std::f64::consts::SQRT_2 * se);
    }
}
