use serde::Serialize;

use super::marginal::{log_loss_joint_at, marginal_breaks, marginal_extent, posterior_risk};
use crate::error::{Error, Result};
use crate::model::expect::marginal_region_probability;
use crate::model::{Interval, Likelihood, Loss, Prior, Region, SelectionRule};
use crate::numerics::quadrature::{Grid, Scheme};

/// Simpson intervals per segment for the θ integrals of the ratio form.
const THETA_SEGMENT_INTERVALS: usize = 2000;
/// Simpson intervals per segment for the y integrals of the per-y form.
const Y_SEGMENT_INTERVALS: usize = 4000;
/// Scan resolution used to resolve loss-threshold rules.
const RESOLVE_SCAN_POINTS: usize = 8001;

/// saBayes risk of a selection rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub rule: SelectionRule,
    /// `r̃_S`, the expected posterior loss under the truncated marginal.
    pub risk: f64,
    /// `Pr(S)` under the marginal of `y`.
    pub selection_prob: f64,
    /// `m · Pr(S)`.
    pub expected_discoveries: f64,
    pub loss: Loss,
    /// Left out of the serialized report, which carries exactly the five
    /// fields above.
    #[serde(skip)]
    pub diagnostics: RiskDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskDiagnostics {
    pub m: f64,
    /// `E V = m ∫_S ρ̃ m(y) dy`.
    pub expected_false_discoveries: f64,
    /// `E V / E R`, which agrees with the pFDR for large R.
    pub ev_over_er: f64,
    /// Selection region in `y` after resolving the rule; absent for rules
    /// on mean-and-variance data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

impl RiskReport {
    /// The same report for `m` parallel units.
    pub fn with_m(mut self, m: f64) -> Self {
        self.expected_discoveries = m * self.selection_prob;
        self.diagnostics.expected_false_discoveries = m * self.selection_prob * self.risk;
        self.diagnostics.m = m;
        self
    }
}

fn require_proper(prior: &Prior) -> Result<()> {
    if !prior.is_proper() {
        return Err(Error::Config(
            "the saBayes risk needs a proper prior; fit one to the data first (empirical Bayes)".into(),
        ));
    }
    prior.validate()
}

/// Selection region of `rule`, resolving a loss-threshold rule
/// `{y : ρ̃(y) ≤ s}` against `prior`.
pub fn resolve_region(rule: &SelectionRule, prior: &Prior, lik: &Likelihood) -> Result<Region> {
    let SelectionRule::LossThreshold { loss, s } = rule else {
        return rule.region(lik);
    };
    require_proper(prior)?;
    let sigma = lik.sigma()?;
    let (lo, hi) = marginal_extent(prior, sigma);
    let mut ys: Vec<f64> = (0..RESOLVE_SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (RESOLVE_SCAN_POINTS - 1) as f64)
        .collect();
    ys.extend(loss.breakpoints());
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let accept = |y: f64| -> Result<bool> { Ok(posterior_risk(prior, lik, loss, y)? <= *s) };
    let flags: Vec<bool> = ys.iter().map(|&y| accept(y)).collect::<Result<_>>()?;

    // boundary between ys[i] and ys[i+1] where the flag changes
    let edge = |i: usize| -> Result<f64> {
        let (mut a, mut b) = (ys[i], ys[i + 1]);
        let fa = flags[i];
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if accept(mid)? == fa {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    };

    let n = ys.len();
    let mut intervals = Vec::new();
    let mut start = None;
    for i in 0..n {
        if flags[i] && start.is_none() {
            start = Some(if i == 0 { f64::NEG_INFINITY } else { edge(i - 1)? });
        }
        if flags[i] && (i + 1 == n || !flags[i + 1]) {
            let end = if i + 1 == n { f64::INFINITY } else { edge(i)? };
            intervals.push(Interval::new(start.take().unwrap(), end));
        }
    }
    Ok(Region::new(intervals))
}

/// Replace a loss-threshold rule by its explicit region.
pub fn resolve_rule(rule: &SelectionRule, prior: &Prior, lik: &Likelihood) -> Result<SelectionRule> {
    match rule {
        SelectionRule::LossThreshold { .. } => Ok(SelectionRule::Region { region: resolve_region(rule, prior, lik)? }),
        other => Ok(other.clone()),
    }
}

/// Pieces of the observation space on which the loss region in θ does not
/// change, each with a representative observation.
fn loss_pieces(loss: &Loss) -> Vec<(Region, f64)> {
    match loss {
        Loss::Directional => vec![
            (Region::at_least(0.0), 1.0),
            (Region::new(vec![Interval::new(f64::NEG_INFINITY, 0.0)]), -1.0),
        ],
        _ => vec![(Region::whole(), 0.0)],
    }
}

/// `∫_lo^hi π_c(θ) g(θ) dθ` over the continuous part of the prior.
fn integrate_continuous<G: Fn(f64) -> f64>(prior: &Prior, lo: f64, hi: f64, g: G) -> Result<f64> {
    if prior.continuous_mass() <= 0.0 {
        return Ok(0.0);
    }
    let support = prior.support_breaks();
    let (s_lo, s_hi) = (support[0], support[support.len() - 1]);
    let (a, b) = (lo.max(s_lo), hi.min(s_hi));
    if b <= a {
        return Ok(0.0);
    }
    let mut breaks: Vec<f64> = support.into_iter().filter(|&x| x > a && x < b).collect();
    breaks.push(a);
    breaks.push(b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let grid = Grid::uniform_per_segment(&breaks, THETA_SEGMENT_INTERVALS, Scheme::Simpson)?;
    let mut acc = 0.0;
    for (&t, &w) in grid.nodes().iter().zip(grid.weights()) {
        let d = prior.density(t);
        if d > 0.0 {
            acc += w * d * g(t);
        }
    }
    Ok(acc)
}

/// `∫_S ρ̃(y) m(y) dy = ∫ π(θ) Pr(L(θ, Y) = 1, Y ∈ S | θ) dθ`.
fn loss_numerator(prior: &Prior, sigma: f64, loss: &Loss, region: &Region) -> Result<f64> {
    let mut total = 0.0;
    for (piece, rep) in loss_pieces(loss) {
        let sel = region.intersect(&piece);
        if sel.is_empty() {
            continue;
        }
        for iv in &loss.loss_region(rep).intervals {
            total += integrate_continuous(prior, iv.lo, iv.hi, |t| sel.normal_prob(t, sigma))?;
        }
        for (at, mass) in prior.atoms() {
            if loss.value(at, rep) > 0.0 {
                total += mass * sel.normal_prob(at, sigma);
            }
        }
    }
    Ok(total)
}

/// saBayes risk `r̃_S = ∫_S ρ̃(y) m(y) dy / Pr(S)` for a single unit.
pub fn sabayes_risk(prior: &Prior, lik: &Likelihood, rule: &SelectionRule, loss: &Loss) -> Result<RiskReport> {
    sabayes_risk_for(prior, lik, rule, loss, 1.0)
}

/// saBayes risk with expected counts for `m` units.
pub fn sabayes_risk_for(
    prior: &Prior,
    lik: &Likelihood,
    rule: &SelectionRule,
    loss: &Loss,
    m: f64,
) -> Result<RiskReport> {
    require_proper(prior)?;
    let sigma = lik.sigma()?;
    let region = resolve_region(rule, prior, lik)?;
    let ps = marginal_region_probability(&region, sigma, prior)?;
    if !(ps > 0.0) {
        return Err(Error::DegenerateRule(format!("rule {rule} has zero selection probability")));
    }
    let num = loss_numerator(prior, sigma, loss, &region)?;
    let risk = (num / ps).clamp(0.0, 1.0);
    Ok(RiskReport {
        rule: rule.clone(),
        risk,
        selection_prob: ps,
        expected_discoveries: m * ps,
        loss: loss.clone(),
        diagnostics: RiskDiagnostics { m, expected_false_discoveries: m * num, ev_over_er: risk, region: Some(region) },
    })
}

/// The same risk computed as `E_{m_S}[ρ̃(Y)]` by quadrature over `y`.
pub fn sabayes_risk_per_y(prior: &Prior, lik: &Likelihood, rule: &SelectionRule, loss: &Loss) -> Result<f64> {
    require_proper(prior)?;
    let sigma = lik.sigma()?;
    let region = resolve_region(rule, prior, lik)?;
    let ps = marginal_region_probability(&region, sigma, prior)?;
    if !(ps > 0.0) {
        return Err(Error::DegenerateRule(format!("rule {rule} has zero selection probability")));
    }
    let (ext_lo, ext_hi) = marginal_extent(prior, sigma);
    let mut inner = marginal_breaks(prior);
    inner.extend(loss.breakpoints());
    let mut acc = 0.0;
    for (piece, rep) in loss_pieces(loss) {
        for iv in &region.intersect(&piece).intervals {
            let (a, b) = (iv.lo.max(ext_lo), iv.hi.min(ext_hi));
            if b <= a {
                continue;
            }
            let mut breaks: Vec<f64> = inner.iter().copied().filter(|&x| x > a && x < b).collect();
            breaks.push(a);
            breaks.push(b);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let grid = Grid::uniform_per_segment(&breaks, Y_SEGMENT_INTERVALS, Scheme::Simpson)?;
            // the decision is constant on a piece, endpoints included
            for (&y, &w) in grid.nodes().iter().zip(grid.weights()) {
                acc += w * log_loss_joint_at(prior, sigma, loss, y, rep)?.exp();
            }
        }
    }
    Ok((acc / ps).clamp(0.0, 1.0))
}

/// pFDR of a rule whose discoveries all claim `θ ∈ a_marg`:
/// `∫ I(θ ∉ A) π(θ) Pr(S | θ) dθ / Pr(S)`.
pub fn constant_discovery_pfdr(prior: &Prior, lik: &Likelihood, rule: &SelectionRule, a_marg: &Region) -> Result<f64> {
    require_proper(prior)?;
    let sigma = lik.sigma()?;
    let region = resolve_region(rule, prior, lik)?;
    let ps = marginal_region_probability(&region, sigma, prior)?;
    if !(ps > 0.0) {
        return Err(Error::DegenerateRule(format!("rule {rule} has zero selection probability")));
    }
    let mut num = 0.0;
    for iv in &a_marg.complement().intervals {
        num += integrate_continuous(prior, iv.lo, iv.hi, |t| region.normal_prob(t, sigma))?;
    }
    for (at, mass) in prior.atoms() {
        if !a_marg.contains(at) {
            num += mass * region.normal_prob(at, sigma);
        }
    }
    Ok((num / ps).clamp(0.0, 1.0))
}
