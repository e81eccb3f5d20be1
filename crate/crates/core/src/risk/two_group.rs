use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Interval, Prior, Region};
use crate::numerics::quadrature::{Grid, Scheme};

/// Nested rejection regions `Γ_c` indexed by a cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NestedFamily {
    /// `y ≥ c`
    Upper,
    /// `y ≤ c`
    Lower,
    /// `|y| ≥ c`
    TwoSided,
}

impl NestedFamily {
    /// The family a region belongs to with its cutoff, if any.
    pub fn of(region: &Region) -> Option<(NestedFamily, f64)> {
        match region.intervals.as_slice() {
            [iv] if iv.hi == f64::INFINITY && iv.lo.is_finite() => Some((NestedFamily::Upper, iv.lo)),
            [iv] if iv.lo == f64::NEG_INFINITY && iv.hi.is_finite() => Some((NestedFamily::Lower, iv.hi)),
            [a, b] if a.lo == f64::NEG_INFINITY && b.hi == f64::INFINITY && a.hi == -b.lo && b.lo >= 0.0 => {
                Some((NestedFamily::TwoSided, b.lo))
            }
            _ => None,
        }
    }

    pub fn region(&self, c: f64) -> Region {
        match self {
            NestedFamily::Upper => Region::at_least(c),
            NestedFamily::Lower => Region::at_most(c),
            NestedFamily::TwoSided => Region::two_sided(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QvaluePoint {
    pub cutoff: f64,
    pub pfdr: f64,
}

/// Two-group model `y ~ π₀ f₀ + (1 − π₀) f₁` with a rejection region Γ.
#[derive(Debug, Clone, Serialize)]
pub struct TwoGroupReport {
    pub pi0: f64,
    pub f0: Prior,
    pub f1: Prior,
    pub gamma: Region,
    /// `Pr(H = 0 | y ∈ Γ)`.
    pub pfdr: f64,
    pub null_prob: f64,
    pub alt_prob: f64,
    /// pFDR over the nested family containing Γ, when Γ belongs to one.
    pub qvalue_curve: Vec<QvaluePoint>,
    pub family: Option<NestedFamily>,
}

const QVALUE_CURVE_POINTS: usize = 161;
const QVALUE_SCAN_POINTS: usize = 2001;

fn check_density(p: &Prior, name: &str) -> Result<()> {
    p.validate()?;
    if !p.is_proper() || p.continuous_mass() < 1.0 {
        return Err(Error::Config(format!("{name} must be a proper density without atoms")));
    }
    Ok(())
}

fn region_prob(p: &Prior, region: &Region) -> Result<f64> {
    let mut acc = 0.0;
    for iv in &region.intervals {
        acc += p.interval_prob(iv.lo, iv.hi)?;
    }
    Ok(acc.clamp(0.0, 1.0))
}

fn pfdr_from(pi0: f64, p0: f64, p1: f64) -> Result<f64> {
    if pi0 == 0.0 {
        return Ok(0.0);
    }
    if pi0 == 1.0 {
        return Ok(1.0);
    }
    let null = pi0 * p0;
    let den = null + (1.0 - pi0) * p1;
    if !(den > 0.0) {
        return Err(Error::DegenerateRule("rejection region has zero probability under both groups".into()));
    }
    Ok(null / den)
}

impl TwoGroupReport {
    /// pFDR of another rejection region under the same model.
    pub fn pfdr_of(&self, region: &Region) -> Result<f64> {
        pfdr_from(self.pi0, region_prob(&self.f0, region)?, region_prob(&self.f1, region)?)
    }

    /// Local fdr `π₀ f₀(y) / (π₀ f₀(y) + (1 − π₀) f₁(y))`.
    pub fn local_fdr(&self, y: f64) -> f64 {
        let a = self.pi0 * self.f0.density(y);
        let b = (1.0 - self.pi0) * self.f1.density(y);
        if a + b > 0.0 {
            a / (a + b)
        } else {
            self.pi0
        }
    }

    /// Infimum of the pFDR over the nested regions that contain `y`.
    pub fn qvalue(&self, y: f64) -> Result<f64> {
        let Some(family) = self.family else {
            return Err(Error::Unsupported("q-values need a one-parameter nested rejection family".into()));
        };
        let (lo, hi) = match family {
            NestedFamily::Upper => (y - 20.0, y),
            NestedFamily::Lower => (y, y + 20.0),
            NestedFamily::TwoSided => (0.0, y.abs()),
        };
        let mut best = f64::INFINITY;
        for i in 0..QVALUE_SCAN_POINTS {
            let c = lo + (hi - lo) * i as f64 / (QVALUE_SCAN_POINTS - 1) as f64;
            if let Ok(p) = self.pfdr_of(&family.region(c)) {
                best = best.min(p);
            }
        }
        Ok(best)
    }

    /// `∫_Γ lfdr(y) m(y) dy / ∫_Γ m(y) dy` by quadrature; equals the pFDR.
    pub fn average_local_fdr(&self) -> Result<f64> {
        let mut extent = self.f0.support_breaks();
        extent.extend(self.f1.support_breaks());
        let lo = extent.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = extent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for iv in &self.gamma.intervals {
            let (a, b) = (iv.lo.max(lo), iv.hi.min(hi));
            if b <= a {
                continue;
            }
            let mut breaks: Vec<f64> = extent.iter().copied().filter(|&x| x > a && x < b).collect();
            breaks.push(a);
            breaks.push(b);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let g = Grid::uniform_per_segment(&breaks, 4000, Scheme::Simpson)?;
            for (&y, &w) in g.nodes().iter().zip(g.weights()) {
                let m = self.pi0 * self.f0.density(y) + (1.0 - self.pi0) * self.f1.density(y);
                num += w * self.local_fdr(y) * m;
                den += w * m;
            }
        }
        if !(den > 0.0) {
            return Err(Error::DegenerateRule("rejection region has zero marginal probability".into()));
        }
        Ok(num / den)
    }
}

/// pFDR, local fdr and q-value curve of the two-group model.
pub fn two_group(pi0: f64, f0: &Prior, f1: &Prior, gamma: &Region) -> Result<TwoGroupReport> {
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::Domain(format!("pi0 must lie in [0, 1], got {pi0}")));
    }
    check_density(f0, "f0")?;
    check_density(f1, "f1")?;
    let null_prob = region_prob(f0, gamma)?;
    let alt_prob = region_prob(f1, gamma)?;
    let pfdr = pfdr_from(pi0, null_prob, alt_prob)?;
    let nested = NestedFamily::of(gamma);
    let mut report = TwoGroupReport {
        pi0,
        f0: f0.clone(),
        f1: f1.clone(),
        gamma: gamma.clone(),
        pfdr,
        null_prob,
        alt_prob,
        qvalue_curve: Vec::new(),
        family: nested.map(|n| n.0),
    };
    if let Some((family, c)) = nested {
        let (lo, hi) = match family {
            NestedFamily::TwoSided => (0.0, c + 4.0),
            _ => (c - 4.0, c + 4.0),
        };
        for i in 0..QVALUE_CURVE_POINTS {
            let cutoff = lo + (hi - lo) * i as f64 / (QVALUE_CURVE_POINTS - 1) as f64;
            if let Ok(p) = report.pfdr_of(&family.region(cutoff)) {
                report.qvalue_curve.push(QvaluePoint { cutoff, pfdr: p });
            }
        }
    }
    Ok(report)
}

/// `Pr(H = 0 | y)` when the hypothesis indicator is held fixed and only `y`
/// is redrawn: each group's density is truncated to Γ.
pub fn fixed_two_group_posterior(pi0: f64, f0: &Prior, f1: &Prior, gamma: &Region, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::Domain(format!("pi0 must lie in [0, 1], got {pi0}")));
    }
    check_density(f0, "f0")?;
    check_density(f1, "f1")?;
    if !gamma.contains(y) {
        return Err(Error::Precondition(format!("observation {y} is outside the rejection region")));
    }
    let p0 = region_prob(f0, gamma)?;
    let p1 = region_prob(f1, gamma)?;
    if !(p0 > 0.0 && p1 > 0.0) {
        return Err(Error::DegenerateRule("a group gives the rejection region zero probability".into()));
    }
    let a = pi0 * f0.density(y) / p0;
    let b = (1.0 - pi0) * f1.density(y) / p1;
    if !(a + b > 0.0) {
        return Err(Error::Numeric(format!("truncated densities vanish at y = {y}")));
    }
    Ok(a / (a + b))
}

/// Rejection region `{y > c}` as used in the two-group examples.
pub fn upper_region(c: f64) -> Region {
    Region::new(vec![Interval::new(c, f64::INFINITY)])
}
