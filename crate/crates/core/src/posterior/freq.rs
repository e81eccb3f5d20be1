use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Interval, Likelihood, Region, SelectionRule};
use crate::numerics::roots::find_root;
use crate::numerics::special::log_add_exp;

#[derive(Debug, Clone, Serialize)]
pub struct SelectiveCi {
    pub intervals: Vec<Interval>,
    pub alpha: f64,
    /// More than one interval, or none.
    pub warning: bool,
    /// The acceptance set reaches the end of the scanned range.
    pub hits_scan_edge: bool,
}

impl SelectiveCi {
    /// `(lo, hi)` of a single-interval result.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.intervals.as_slice() {
            [iv] => Some((iv.lo, iv.hi)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FreqCiOptions {
    pub scan_halfwidth: f64,
    pub scan_points: usize,
    pub tol: f64,
}

impl Default for FreqCiOptions {
    fn default() -> Self {
        FreqCiOptions { scan_halfwidth: 20.0, scan_points: 2001, tol: 1e-3 }
    }
}

/// `log Pr(Y ≤ y, Y ∈ S | θ)` and `log Pr(Y > y, Y ∈ S | θ)`.
fn log_split(region: &Region, y: f64, theta: f64, sigma: f64) -> (f64, f64) {
    let below = region.clip(f64::NEG_INFINITY, y).normal_log_prob(theta, sigma);
    let above = region.clip(y, f64::INFINITY).normal_log_prob(theta, sigma);
    (below, above)
}

/// `logit F_S(y | θ)` where `F_S` is the truncated distribution function.
fn logit_truncated_cdf(region: &Region, y: f64, theta: f64, sigma: f64) -> f64 {
    let (b, a) = log_split(region, y, theta, sigma);
    b - a
}

/// Truncated distribution function `F_S(y | θ)`, stable in the tails.
pub fn truncated_cdf(region: &Region, y: f64, theta: f64, sigma: f64) -> f64 {
    let (b, a) = log_split(region, y, theta, sigma);
    (b - log_add_exp(b, a)).exp()
}

/// Confidence set obtained by inverting equal-tail tests of the truncated
/// likelihood: the θ₀ for which `y` lies between the α/2 and 1 − α/2
/// quantiles of `f(· | θ₀)` restricted to the selection region.
pub fn freq_selective_ci(lik: &Likelihood, rule: &SelectionRule, y: f64, alpha: f64) -> Result<SelectiveCi> {
    freq_selective_ci_with(lik, rule, y, alpha, &FreqCiOptions::default())
}

pub fn freq_selective_ci_with(
    lik: &Likelihood,
    rule: &SelectionRule,
    y: f64,
    alpha: f64,
    opts: &FreqCiOptions,
) -> Result<SelectiveCi> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let sigma = lik.sigma()?;
    let region = rule.region(lik)?;
    if !region.contains(y) {
        return Err(Error::Precondition(format!("observation {y} is not selected by rule {rule}")));
    }
    let lo_cut = (0.5 * alpha / (1.0 - 0.5 * alpha)).ln();
    let hi_cut = -lo_cut;
    let g = |theta: f64| logit_truncated_cdf(&region, y, theta, sigma);
    // F_S(y | θ) decreases in θ; accepted while lo_cut ≤ g ≤ hi_cut.
    let accept = |v: f64| v >= lo_cut && v <= hi_cut;
    let n = opts.scan_points.max(3);
    let a = y - opts.scan_halfwidth * sigma;
    let b = y + opts.scan_halfwidth * sigma;
    let step = (b - a) / (n - 1) as f64;
    let thetas: Vec<f64> = (0..n).map(|i| a + step * i as f64).collect();
    let vals: Vec<f64> = thetas.iter().map(|&t| g(t)).collect();
    let flags: Vec<bool> = vals.iter().map(|&v| accept(v)).collect();

    // boundary of the acceptance set between scan nodes i and i+1
    let refine = |i: usize| -> Result<f64> {
        let (t0, t1) = (thetas[i], thetas[i + 1]);
        let (v0, v1) = (vals[i], vals[i + 1]);
        let rejected = if accept(v0) { v1 } else { v0 };
        let cut = if rejected > hi_cut { hi_cut } else { lo_cut };
        find_root(|t| g(t) - cut, t0, t1, opts.tol)
    };

    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    let mut hits_scan_edge = false;
    for i in 0..n {
        if flags[i] && start.is_none() {
            start = Some(if i == 0 {
                hits_scan_edge = true;
                thetas[0]
            } else {
                refine(i - 1)?
            });
        }
        if !flags[i] {
            continue;
        }
        let ends_here = i + 1 == n || !flags[i + 1];
        if ends_here {
            let end = if i + 1 == n {
                hits_scan_edge = true;
                thetas[n - 1]
            } else {
                refine(i)?
            };
            intervals.push(Interval::new(start.take().unwrap(), end));
        }
    }
    let warning = intervals.len() != 1;
    Ok(SelectiveCi { intervals, alpha, warning, hits_scan_edge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::numerics::special::{normal_cdf, normal_quantile};

    #[test]
    fn untruncated_case_is_the_z_interval() {
        let ci = freq_selective_ci(&Likelihood::standard(), &SelectionRule::All, 3.4, 0.05).unwrap();
        let (lo, hi) = ci.bounds().unwrap();
        let z = normal_quantile(0.975).unwrap();
        assert!((lo - (3.4 - z)).abs() < 1e-3 && (hi - (3.4 + z)).abs() < 1e-3, "{lo} {hi}");
        assert!(!ci.warning);
    }

    #[test]
    fn unselected_observation() {
        let r = freq_selective_ci(&Likelihood::standard(), &SelectionRule::OneSided { a: 3.111 }, 2.0, 0.05);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn truncated_cdf_matches_direct_formula() {
        let region = Region::at_least(3.111);
        let (y, t) = (3.4, 1.0);
        let direct = (normal_cdf(y - t) - normal_cdf(3.111 - t)) / (1.0 - normal_cdf(3.111 - t));
        assert!((truncated_cdf(&region, y, t, 1.0) - direct).abs() < 1e-13);
    }

    #[test]
    fn coverage_under_truncation() {
        // θ₀ = 1, y drawn from N(1, 1) truncated to y ≥ 3.111.
        let rule = SelectionRule::OneSided { a: 3.111 };
        let lik = Likelihood::standard();
        let mut rng = RngStream::new(77, 0);
        let opts = FreqCiOptions { scan_points: 401, ..Default::default() };
        let n = 10_000;
        let p_lo = normal_cdf(3.111 - 1.0);
        let mut covered = 0;
        for _ in 0..n {
            let u = p_lo + (1.0 - p_lo) * rng.uniform_open();
            let y = 1.0 + normal_quantile(u.min(1.0 - 1e-16)).unwrap();
            let ci = freq_selective_ci_with(&lik, &rule, y, 0.05, &opts).unwrap();
            if ci.intervals.iter().any(|iv| iv.contains(1.0)) {
                covered += 1;
            }
        }
        let cov = covered as f64 / n as f64;
        assert!((cov - 0.95).abs() <= 0.01, "coverage {cov}");
    }
}
