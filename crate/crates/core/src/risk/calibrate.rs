use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sabayes::{sabayes_risk, RiskReport};
use crate::error::{Error, Result};
use crate::model::{Likelihood, Loss, Prior, SelectionRule};
use crate::numerics::roots::find_root;

/// Probes of the risk curve taken before bisection.
pub const CALIBRATION_PROBES: usize = 50;

/// One-parameter families of selection rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleFamily {
    /// `|y| ≥ a`, `a ∈ [0, 10]`.
    TwoSided,
    /// `y ≥ a`, `a ∈ [0, 10]`.
    OneSided,
    /// `ρ̃(y) ≤ s`, `s ∈ [0, 1]`, for the loss being calibrated.
    LossThreshold,
}

impl RuleFamily {
    pub fn rule(&self, param: f64, loss: &Loss) -> SelectionRule {
        match self {
            RuleFamily::TwoSided => SelectionRule::TwoSided { a: param },
            RuleFamily::OneSided => SelectionRule::OneSided { a: param },
            RuleFamily::LossThreshold => SelectionRule::LossThreshold { loss: loss.clone(), s: param },
        }
    }

    pub fn bracket(&self) -> (f64, f64) {
        match self {
            RuleFamily::TwoSided | RuleFamily::OneSided => (0.0, 10.0),
            RuleFamily::LossThreshold => (0.0, 1.0),
        }
    }
}

impl std::str::FromStr for RuleFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "twosided" | "two_sided" => Ok(RuleFamily::TwoSided),
            "onesided" | "one_sided" => Ok(RuleFamily::OneSided),
            "loss" | "loss_threshold" => Ok(RuleFamily::LossThreshold),
            other => Err(Error::Config(format!("unknown rule family '{other}'"))),
        }
    }
}

/// Result of calibrating a rule family to a target risk.
#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub family: RuleFamily,
    pub target: f64,
    /// Family parameter of the calibrated rule; `None` for the whole space.
    pub parameter: Option<f64>,
    pub report: RiskReport,
}

impl Calibration {
    pub fn rule(&self) -> &SelectionRule {
        &self.report.rule
    }
}

/// Tolerance on `|r̃_S − q|` for a calibrated rule.
pub const CALIBRATION_TOLERANCE: f64 = 1e-3;

/// Find the rule of `family` whose saBayes risk equals `q`.
///
/// The risk curve is probed on an even grid over the family bracket and must
/// be monotone there. Within a loss-threshold family the root is the largest
/// cutoff with risk at most `q`, which maximizes the expected number of
/// discoveries.
pub fn calibrate_rule(family: &RuleFamily, prior: &Prior, lik: &Likelihood, loss: &Loss, q: f64) -> Result<Calibration> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("target risk must lie in (0, 1), got {q}")));
    }
    let whole = sabayes_risk(prior, lik, &SelectionRule::All, loss)?;
    if (whole.risk - q).abs() <= CALIBRATION_TOLERANCE {
        return Ok(Calibration { family: family.clone(), target: q, parameter: None, report: whole });
    }

    let (lo, hi) = family.bracket();
    let params: Vec<f64> = (0..CALIBRATION_PROBES)
        .map(|i| lo + (hi - lo) * i as f64 / (CALIBRATION_PROBES - 1) as f64)
        .collect();
    let risk_at = |p: f64| -> Result<Option<f64>> {
        match sabayes_risk(prior, lik, &family.rule(p, loss), loss) {
            Ok(r) => Ok(Some(r.risk)),
            Err(Error::DegenerateRule(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let probes: Vec<Option<f64>> = params.par_iter().map(|&p| risk_at(p)).collect::<Result<_>>()?;
    let valid: Vec<(f64, f64)> = params.iter().zip(&probes).filter_map(|(&p, r)| r.map(|r| (p, r))).collect();
    if valid.len() < 2 {
        return Err(Error::Calibration { target: q, min_risk: f64::NAN, max_risk: f64::NAN });
    }
    let min_risk = valid.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let max_risk = valid.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let increasing = valid[valid.len() - 1].1 >= valid[0].1;
    let slack = 1e-9 * (max_risk - min_risk).max(1e-12);
    for w in valid.windows(2) {
        let step = w[1].1 - w[0].1;
        if (increasing && step < -slack) || (!increasing && step > slack) {
            return Err(Error::Precondition(format!(
                "saBayes risk is not monotone over the family bracket (between {} and {})",
                w[0].0, w[1].0
            )));
        }
    }
    let below = |r: f64| r <= q;
    let idx = valid.windows(2).position(|w| below(w[0].1) != below(w[1].1));
    let Some(i) = idx else {
        return Err(Error::Calibration { target: q, min_risk, max_risk });
    };
    let (a, b) = (valid[i].0, valid[i + 1].0);
    let g = |p: f64| risk_at(p).ok().flatten().map(|r| r - q).unwrap_or(f64::NAN);
    let root = find_root(g, a, b, 1e-9 * (hi - lo))?;
    let param = root;
    let report = sabayes_risk(prior, lik, &family.rule(param, loss), loss)?;
    if (report.risk - q).abs() > CALIBRATION_TOLERANCE {
        return Err(Error::Calibration { target: q, min_risk, max_risk });
    }
    Ok(Calibration { family: family.clone(), target: q, parameter: Some(param), report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sided_family_reaches_target() {
        let c = calibrate_rule(&RuleFamily::TwoSided, &Prior::example_mixture(), &Likelihood::standard(), &Loss::Directional, 0.10)
            .unwrap();
        assert!((c.report.risk - 0.10).abs() <= CALIBRATION_TOLERANCE);
        let a = c.parameter.unwrap();
        assert!((a - 2.9164).abs() < 2e-3, "{a}");
    }

    #[test]
    fn unreachable_target_reports_range() {
        let r = calibrate_rule(&RuleFamily::TwoSided, &Prior::example_mixture(), &Likelihood::standard(), &Loss::Directional, 0.9);
        assert!(matches!(r, Err(Error::Calibration { .. })), "{r:?}");
    }

    #[test]
    fn whole_space_at_its_own_risk() {
        let prior = Prior::example_mixture();
        let lik = Likelihood::standard();
        let q = sabayes_risk(&prior, &lik, &SelectionRule::All, &Loss::Directional).unwrap().risk;
        let c = calibrate_rule(&RuleFamily::TwoSided, &prior, &lik, &Loss::Directional, q).unwrap();
        assert_eq!(c.parameter, None);
        assert_eq!(c.report.rule, SelectionRule::All);
    }

    #[test]
    fn loss_threshold_family_selects_at_least_as_much() {
        let prior = Prior::example_mixture();
        let lik = Likelihood::standard();
        let two = calibrate_rule(&RuleFamily::TwoSided, &prior, &lik, &Loss::Directional, 0.10).unwrap();
        let lt = calibrate_rule(&RuleFamily::LossThreshold, &prior, &lik, &Loss::Directional, 0.10).unwrap();
        assert!(lt.report.selection_prob >= two.report.selection_prob - 1e-6);
    }
}
