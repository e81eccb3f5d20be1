use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Interval;
use crate::numerics::special::normal_quantile;

/// Selected count, miss count and their proportion `V / max(1, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct CoverageLedger {
    pub R: usize,
    pub V: usize,
    pub FCP: f64,
}

impl CoverageLedger {
    pub fn new(r: usize, v: usize) -> Result<Self> {
        if v > r {
            return Err(Error::Domain(format!("miss count {v} exceeds selected count {r}")));
        }
        Ok(CoverageLedger { R: r, V: v, FCP: v as f64 / r.max(1) as f64 })
    }

    /// Misses of `intervals[j]` against `truth[index_j]`.
    pub fn from_intervals(intervals: &[SelectedInterval], truth: &[f64]) -> Result<Self> {
        let mut v = 0;
        for iv in intervals {
            let t = *truth
                .get(iv.index)
                .ok_or_else(|| Error::Domain(format!("no true value for index {}", iv.index)))?;
            if !iv.interval.contains(t) {
                v += 1;
            }
        }
        CoverageLedger::new(intervals.len(), v)
    }
}

/// A confidence interval for a selected parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectedInterval {
    pub index: usize,
    pub interval: Interval,
    pub level: f64,
}

/// A selected parameter `(index, y, σ)`.
pub type Selected = (usize, f64, f64);

/// Marginal `level` intervals `y ± z σ` without selection adjustment.
pub fn marginal_cis(selected: &[Selected], level: f64) -> Result<Vec<SelectedInterval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let z = normal_quantile(0.5 + 0.5 * level)?;
    Ok(selected
        .iter()
        .map(|&(index, y, s)| SelectedInterval { index, interval: Interval::new(y - z * s, y + z * s), level })
        .collect())
}

/// FCR-adjusted intervals: marginal level `1 − R q / m` for each of the `R`
/// selected parameters.
pub fn fcr_adjusted_cis(selected: &[Selected], q: f64, m: usize) -> Result<Vec<SelectedInterval>> {
    let r = selected.len();
    if r == 0 {
        return Err(Error::Precondition("FCR adjustment needs at least one selected parameter".into()));
    }
    if r > m {
        return Err(Error::Domain(format!("{r} selected out of a family of {m}")));
    }
    let alpha = r as f64 * q / m as f64;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("adjusted level 1 - Rq/m = {} is degenerate", 1.0 - alpha)));
    }
    marginal_cis(selected, 1.0 - alpha)
}

/// Sign decisions for `|y| > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalCalls {
    /// `(index, sign)` with sign `+1` or `-1`.
    pub calls: Vec<(usize, i8)>,
    /// Present when the true parameters were supplied.
    pub ledger: Option<CoverageLedger>,
}

/// Declare `sign(y)` for every `|y| > threshold`; with `truth`, count calls
/// whose sign disagrees with θ (θ = 0 disagrees with every call).
pub fn directional_calls(ys: &[f64], threshold: f64, truth: Option<&[f64]>) -> Result<DirectionalCalls> {
    if let Some(t) = truth {
        if t.len() != ys.len() {
            return Err(Error::Domain(format!("{} observations but {} true values", ys.len(), t.len())));
        }
    }
    let calls: Vec<(usize, i8)> = ys
        .iter()
        .enumerate()
        .filter(|(_, y)| y.abs() > threshold)
        .map(|(i, &y)| (i, if y > 0.0 { 1 } else { -1 }))
        .collect();
    let ledger = match truth {
        None => None,
        Some(t) => {
            let v = calls
                .iter()
                .filter(|&&(i, s)| if s > 0 { t[i] <= 0.0 } else { t[i] >= 0.0 })
                .count();
            Some(CoverageLedger::new(calls.len(), v)?)
        }
    };
    Ok(DirectionalCalls { calls, ledger })
}
