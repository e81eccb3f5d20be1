use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::spec::GenerativeSpec;
use crate::error::{Error, Result};
use crate::model::{EffectKind, Region, SelectionRule};
use crate::numerics::special::{normal_cdf, normal_quantile, normal_sf};
use crate::numerics::RngStream;

/// Draws between acceptance-rate checks in rejection sampling.
pub const PROBE_BATCH: u64 = 1_000_000;
/// Smallest acceptance rate tolerated by rejection sampling.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct TruncatedSample {
    /// Accepted `(θ, y)` pairs.
    pub pairs: Vec<(f64, f64)>,
    /// Draws of `y` attempted (for fixed effects, one per realization).
    pub attempts: u64,
    /// Accepted fraction; for fixed effects the mean `Pr(S | θ)` of the draws.
    pub acceptance_rate: f64,
}

/// Draw from `N(mean, sd²)` restricted to `region` by inverse CDF, choosing
/// among the region's intervals in proportion to their probability.
pub fn sample_truncated_normal(region: &Region, mean: f64, sd: f64, rng: &mut RngStream) -> Result<f64> {
    let logs: Vec<f64> = region
        .intervals
        .iter()
        .map(|iv| Region::new(vec![*iv]).normal_log_prob(mean, sd))
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::InfeasibleTruncation { rate: 0.0 });
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.uniform() * total;
    let mut pick = w.len() - 1;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            pick = i;
            break;
        }
        u -= wi;
    }
    let iv = region.intervals[pick];
    let (a, b) = ((iv.lo - mean) / sd, (iv.hi - mean) / sd);
    let v = rng.uniform_open();
    let z = if a >= 0.0 {
        // upper tail: work with survival probabilities
        let (sa, sb) = (normal_sf(a), normal_sf(b));
        -normal_quantile((sb + v * (sa - sb)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))?
    } else if b <= 0.0 {
        let (ca, cb) = (normal_cdf(a), normal_cdf(b));
        normal_quantile((ca + v * (cb - ca)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))?
    } else {
        let (ca, cb) = (normal_cdf(a), normal_cdf(b));
        normal_quantile((ca + v * (cb - ca)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))?
    };
    Ok((mean + sd * z).clamp(iv.lo, iv.hi))
}

/// `n` realizations of `(θ, y)` for unit `target` under the truncated model
/// of the spec's effect kind.
///
/// Random: `(θ, y)` redrawn together until `y ∈ S`. Fixed: θ drawn once per
/// realization and `y` redrawn given that θ until selection, done exactly by
/// sampling the truncated normal. Mixed: λ drawn once per realization,
/// `(θ, y)` redrawn given λ until selection.
pub fn sample_truncated(
    spec: &GenerativeSpec,
    rule: &SelectionRule,
    target: usize,
    n: usize,
    rng: &mut RngStream,
) -> Result<TruncatedSample> {
    spec.validate()?;
    if target >= spec.m {
        return Err(Error::Domain(format!("unit {target} is outside 0..{}", spec.m)));
    }
    let sigma = spec.lik.sigma()?;
    let region = rule.region(&spec.lik)?;
    if region.is_empty() {
        return Err(Error::DegenerateRule("empty selection region".into()));
    }
    let prior = spec.prior_of(target);
    let mut pairs = Vec::with_capacity(n);
    let mut attempts: u64 = 0;

    let noise = |rng: &mut RngStream| -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        sigma * e
    };
    let check = |attempts: u64, accepted: usize| -> Result<()> {
        if attempts % PROBE_BATCH == 0 {
            let rate = accepted as f64 / attempts as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::InfeasibleTruncation { rate });
            }
        }
        Ok(())
    };

    match (&spec.kind, &spec.non_exchangeable) {
        (EffectKind::Fixed, _) => {
            let mut rate_sum = 0.0;
            for _ in 0..n {
                let theta = prior.sample(rng)?;
                let p = region.normal_prob(theta, sigma);
                rate_sum += p;
                let y = sample_truncated_normal(&region, theta, sigma, rng)?;
                pairs.push((theta, y));
                attempts += 1;
            }
            let acceptance_rate = if n > 0 { rate_sum / n as f64 } else { f64::NAN };
            return Ok(TruncatedSample { pairs, attempts, acceptance_rate });
        }
        (EffectKind::Mixed { hyperprior, conditional }, None) => {
            while pairs.len() < n {
                let lambda = hyperprior.sample(rng)?;
                let cond = conditional.at(lambda)?;
                loop {
                    let theta = cond.sample(rng)?;
                    let y = theta + noise(rng);
                    attempts += 1;
                    let ok = region.contains(y);
                    if ok {
                        pairs.push((theta, y));
                    }
                    check(attempts, pairs.len())?;
                    if ok {
                        break;
                    }
                }
            }
        }
        _ => {
            while pairs.len() < n {
                let theta = prior.sample(rng)?;
                let y = theta + noise(rng);
                attempts += 1;
                if region.contains(y) {
                    pairs.push((theta, y));
                }
                check(attempts, pairs.len())?;
            }
        }
    }
    for &(_, y) in &pairs {
        assert!(region.contains(y), "accepted observation {y} violates the selection rule");
    }
    let acceptance_rate = if attempts > 0 { pairs.len() as f64 / attempts as f64 } else { f64::NAN };
    Ok(TruncatedSample { pairs, attempts, acceptance_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{marginal_selection_probability, ConditionalPrior, Prior};

    fn spec(kind: EffectKind) -> GenerativeSpec {
        GenerativeSpec { kind, ..GenerativeSpec::polygenic(1) }
    }

    #[test]
    fn random_acceptance_rate_matches_selection_probability() {
        let s = spec(EffectKind::Random);
        let rule = SelectionRule::OneSided { a: 1.0 };
        let out = sample_truncated(&s, &rule, 0, 20_000, &mut RngStream::new(4, 0)).unwrap();
        let p = marginal_selection_probability(&rule, &s.lik, &s.prior).unwrap();
        let se = (p * (1.0 - p) / out.attempts as f64).sqrt();
        assert!((out.acceptance_rate - p).abs() < 3.0 * se, "{} vs {p}", out.acceptance_rate);
        assert!(out.pairs.iter().all(|&(_, y)| y >= 1.0));
    }

    #[test]
    fn random_draws_follow_the_truncated_marginal() {
        use crate::risk::truncated_marginal;
        let s = spec(EffectKind::Random);
        let rule = SelectionRule::OneSided { a: 3.111 };
        let n = 20_000;
        let out = sample_truncated(&s, &rule, 0, n, &mut RngStream::new(12, 0)).unwrap();
        let width = 0.25;
        for b in 0..8 {
            let (lo, hi) = (3.111 + width * b as f64, 3.111 + width * (b + 1) as f64);
            let count = out.pairs.iter().filter(|p| p.1 >= lo && p.1 < hi).count() as f64;
            let g = crate::numerics::Grid::simpson(lo, hi, 41).unwrap();
            let p: f64 = g
                .nodes()
                .iter()
                .zip(g.weights())
                .map(|(&y, &w)| w * truncated_marginal(&s.prior, &s.lik, &rule, y).unwrap())
                .sum();
            let se = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((count - n as f64 * p).abs() < 3.0 * se.max(1.0), "bin {b}: {count} vs {}", n as f64 * p);
        }
    }

    #[test]
    fn fixed_effects_are_shrunk_towards_zero() {
        let rule = SelectionRule::OneSided { a: 3.111 };
        let window = |s: &TruncatedSample| {
            let sel: Vec<f64> = s.pairs.iter().filter(|p| p.1 > 3.3 && p.1 < 3.5).map(|p| p.0).collect();
            sel.iter().sum::<f64>() / sel.len() as f64
        };
        let r = sample_truncated(&spec(EffectKind::Random), &rule, 0, 4000, &mut RngStream::new(7, 0)).unwrap();
        let f = sample_truncated(&spec(EffectKind::Fixed), &rule, 0, 40_000, &mut RngStream::new(7, 1)).unwrap();
        assert!(window(&f) < window(&r) - 0.3, "{} {}", window(&f), window(&r));
    }

    #[test]
    fn whole_space_kinds_agree_in_distribution() {
        let mixed = EffectKind::Mixed {
            hyperprior: Prior::mixture(vec![(0.9, Prior::PointMass { at: 10.0 }), (0.1, Prior::PointMass { at: 1.0 })]).unwrap(),
            conditional: ConditionalPrior::LaplaceRate,
        };
        let mut means = Vec::new();
        for (k, kind) in [EffectKind::Random, EffectKind::Fixed, mixed].into_iter().enumerate() {
            let out = sample_truncated(&spec(kind), &SelectionRule::All, 0, 40_000, &mut RngStream::new(9, k as u64)).unwrap();
            assert_eq!(out.pairs.len(), 40_000);
            means.push(out.pairs.iter().map(|p| p.1 * p.1).sum::<f64>() / 40_000.0);
        }
        for m in &means {
            assert!((m - 1.218).abs() < 0.05, "{means:?}");
        }
    }

    #[test]
    fn truncated_normal_sampler_stays_in_region() {
        let region = Region::two_sided(6.0);
        let mut rng = RngStream::new(1, 1);
        let mut upper = 0;
        for _ in 0..2000 {
            let y = sample_truncated_normal(&region, 0.5, 1.0, &mut rng).unwrap();
            assert!(region.contains(y));
            if y > 0.0 {
                upper += 1;
            }
        }
        assert!(upper > 1900);
    }

    #[test]
    fn infeasible_truncation_is_reported() {
        let s = GenerativeSpec::exchangeable(1, Prior::PointMass { at: 0.0 });
        let r = sample_truncated(&s, &SelectionRule::OneSided { a: 8.0 }, 0, 1, &mut RngStream::new(0, 0));
        assert!(matches!(r, Err(Error::InfeasibleTruncation { .. })), "{r:?}");
    }
}
