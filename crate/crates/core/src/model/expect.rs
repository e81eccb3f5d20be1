use super::effect::ConditionalPrior;
use super::likelihood::Likelihood;
use super::prior::Prior;
use super::rule::{ParamPoint, SelectionRule};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{Grid, Scheme};
use crate::numerics::special::{normal_cdf, normal_log_cdf};

/// Simpson intervals between consecutive prior breakpoints.
pub const PRIOR_SEGMENT_INTERVALS: usize = 2000;

/// Quadrature grid for the continuous part of a proper location prior, with
/// `extra` points inserted as breakpoints when they fall inside the prior's
/// effective support.
pub fn prior_grid(prior: &Prior, extra: &[f64], per_segment: usize) -> Result<Grid> {
    let mut breaks = prior.support_breaks();
    if breaks.len() < 2 {
        return Err(match prior {
            Prior::Flat => Error::Config(
                "an improper prior cannot be integrated; fit a proper (empirical Bayes) prior first".into(),
            ),
            _ => Error::Unsupported(format!("prior {prior} has no location-scale support")),
        });
    }
    let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
    let gap = (hi - lo) * 1e-9;
    breaks.extend(extra.iter().copied().filter(|&x| x > lo + gap && x < hi - gap));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= gap);
    Grid::uniform_per_segment(&breaks, per_segment, Scheme::Simpson)
}

/// `∫ f dπ` over a proper location prior, atoms included exactly.
pub fn prior_expectation<F: Fn(f64) -> f64>(prior: &Prior, extra: &[f64], f: F) -> Result<f64> {
    let mut acc = 0.0;
    for (at, mass) in prior.atoms() {
        acc += mass * f(at);
    }
    if prior.continuous_mass() > 0.0 {
        let grid = prior_grid(prior, extra, PRIOR_SEGMENT_INTERVALS)?;
        let mut cont = 0.0;
        for (&t, &w) in grid.nodes().iter().zip(grid.weights()) {
            let d = prior.density(t);
            if d > 0.0 {
                let v = f(t);
                if !v.is_finite() {
                    return Err(Error::NonFinite { at: t, value: v });
                }
                cont += w * d * v;
            }
        }
        acc += cont;
    }
    Ok(acc)
}

/// `Pr(S) = ∫ Pr(S | θ) π(θ) dθ` for scalar observations.
pub fn marginal_selection_probability(rule: &SelectionRule, lik: &Likelihood, prior: &Prior) -> Result<f64> {
    let sigma = lik.sigma()?;
    let region = rule.region(lik)?;
    marginal_region_probability(&region, sigma, prior)
}

pub(crate) fn marginal_region_probability(region: &super::region::Region, sigma: f64, prior: &Prior) -> Result<f64> {
    Ok(match prior {
        Prior::Normal { mean, var } => region.normal_prob(*mean, (var + sigma * sigma).sqrt()),
        Prior::PointMass { at } => region.normal_prob(*at, sigma),
        Prior::Mixture { components } => {
            let mut acc = 0.0;
            for c in components {
                acc += c.weight * marginal_region_probability(region, sigma, &c.prior)?;
            }
            acc
        }
        Prior::TwoGroup { pi0, alt } => {
            pi0 * region.normal_prob(0.0, sigma) + (1.0 - pi0) * marginal_region_probability(region, sigma, alt)?
        }
        Prior::Laplace { rate } => region
            .intervals
            .iter()
            .map(|iv| laplace_normal_interval(*rate, sigma, iv.lo, iv.hi))
            .sum::<f64>()
            .clamp(0.0, 1.0),
        Prior::Flat => {
            return Err(Error::Config(
                "the marginal selection probability is undefined under an improper prior".into(),
            ))
        }
        Prior::ScaledInvChiSq { .. } => {
            return Err(Error::Unsupported("a variance prior is not a location prior".into()))
        }
    })
}

/// `Pr(Y ≤ c)` for `Y = θ + ε`, `θ ~ Laplace(rate)`, `ε ~ N(0, σ²)`, computed
/// on the lower side where it is small.
fn laplace_normal_lower(rate: f64, sigma: f64, c: f64) -> f64 {
    if c > 0.0 {
        return 1.0 - laplace_normal_lower(rate, sigma, -c);
    }
    let rs = rate * sigma;
    let z = c / sigma;
    let shift = 0.5 * rs * rs;
    let a = -rate * c + shift + normal_log_cdf(z - rs);
    let b = rate * c + shift + normal_log_cdf(-z - rs);
    (normal_cdf(z) - 0.5 * a.exp() + 0.5 * b.exp()).max(0.0)
}

/// `Pr(lo ≤ Y ≤ hi)` for the Laplace-plus-normal convolution, using the
/// symmetric tail `Pr(Y ≥ c) = Pr(Y ≤ -c)` to avoid cancellation.
pub(crate) fn laplace_normal_interval(rate: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let cdf = |c: f64| {
        if c == f64::NEG_INFINITY {
            0.0
        } else if c == f64::INFINITY {
            1.0
        } else {
            laplace_normal_lower(rate, sigma, c)
        }
    };
    let upper = |c: f64| cdf(-c);
    if lo >= 0.0 {
        (upper(lo) - upper(hi)).max(0.0)
    } else {
        (cdf(hi) - cdf(lo)).max(0.0)
    }
}

/// `Pr(S | λ) = ∫ Pr(S | θ) π₁(θ | λ) dθ`.
pub fn selection_probability_given_hyper(
    rule: &SelectionRule,
    lik: &Likelihood,
    conditional: &ConditionalPrior,
    lambda: f64,
) -> Result<f64> {
    let prior = conditional.at(lambda)?;
    if let Prior::PointMass { at } = prior {
        return super::rule::selection_probability(rule, lik, ParamPoint::Scalar(at));
    }
    marginal_selection_probability(rule, lik, &prior)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_convolution_probabilities_match_quadrature() {
        let prior = Prior::laplace(2.5).unwrap();
        for (lo, hi) in [(f64::NEG_INFINITY, -1.0), (3.111, f64::INFINITY), (-0.5, 2.0), (1.0, 4.0), (f64::NEG_INFINITY, 0.7)] {
            let closed = laplace_normal_interval(2.5, 1.3, lo, hi);
            let region = super::super::region::Region::new(vec![super::super::region::Interval::new(lo, hi)]);
            let quad = prior_expectation(&prior, &[], |t| region.normal_prob(t, 1.3)).unwrap();
            assert!((closed - quad).abs() < 1e-8 * closed.max(1e-3), "[{lo}, {hi}]: {closed} {quad}");
        }
        assert!((laplace_normal_interval(2.5, 1.3, f64::NEG_INFINITY, f64::INFINITY) - 1.0).abs() < 1e-15);
    }
    use crate::numerics::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn normal_prior_closed_form_matches_quadrature() {
        let rule = SelectionRule::TwoSided { a: 2.0 };
        let lik = Likelihood::standard();
        let prior = Prior::normal(0.5, 2.0).unwrap();
        let closed = marginal_selection_probability(&rule, &lik, &prior).unwrap();
        let region = rule.region(&lik).unwrap();
        let quad = prior_expectation(&prior, &[], |t| region.normal_prob(t, 1.0)).unwrap();
        assert!((closed - quad).abs() < 1e-12);
    }

    #[test]
    fn point_mass_conditional_reduces_exactly() {
        let rule = SelectionRule::TwoSided { a: 3.111 };
        let lik = Likelihood::standard();
        let c = ConditionalPrior::NormalLocation { var: 0.0 };
        for t in [-2.0, 0.0, 1.5, 4.0] {
            let a = selection_probability_given_hyper(&rule, &lik, &c, t).unwrap();
            let b = super::super::rule::selection_probability(&rule, &lik, ParamPoint::Scalar(t)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn laplace_rate_hyper_matches_monte_carlo() {
        let rule = SelectionRule::TwoSided { a: 3.111 };
        let lik = Likelihood::standard();
        let c = ConditionalPrior::LaplaceRate;
        let p10 = selection_probability_given_hyper(&rule, &lik, &c, 10.0).unwrap();
        let p1 = selection_probability_given_hyper(&rule, &lik, &c, 1.0).unwrap();
        assert!(p1 > p10);
        let mut rng = RngStream::new(3, 1);
        let n = 1_000_000;
        for (rate, p) in [(10.0, p10), (1.0, p1)] {
            let prior = Prior::laplace(rate).unwrap();
            let mut hits = 0usize;
            for _ in 0..n {
                let t = prior.sample(&mut rng).unwrap();
                let z: f64 = StandardNormal.sample(&mut rng);
                if (t + z).abs() >= 3.111 {
                    hits += 1;
                }
            }
            let est = hits as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((est - p).abs() < 3.0 * se, "rate {rate}: {est} vs {p}");
        }
    }

    #[test]
    fn improper_prior_is_rejected() {
        let r = marginal_selection_probability(&SelectionRule::All, &Likelihood::standard(), &Prior::Flat);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
