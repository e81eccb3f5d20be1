use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{generate, GenerativeSpec};
use crate::error::{Error, Result};
use crate::model::{EffectKind, Interval, Prior, Region, SelectionRule};
use crate::multiplicity::bh_procedure;
use crate::numerics::special::{normal_quantile, normal_sf};
use crate::numerics::RngStream;
use crate::posterior::{sa_posterior_with, PosteriorOptions};
use crate::risk::resolve_rule;

/// How the selected set is chosen in each replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum RulePolicy {
    /// The same rule in every replication.
    Fixed { rule: SelectionRule },
    /// BH at level `q` on the two-sided p-values `2Φ(−|y|/σ)`, rerun per
    /// replication.
    Bh { q: f64 },
}

/// Interval families whose false coverage proportion is recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub level: f64,
    /// Level of the FCR-adjusted marginal intervals.
    pub fcr_q: f64,
    /// Credible intervals of the flat-prior fixed-effect adjusted posterior.
    pub sabayes_flat: bool,
    /// Credible intervals of the random-effect posterior under the true prior.
    pub sabayes_random: bool,
    /// Grid nodes of each credible-interval posterior.
    pub posterior_nodes: usize,
}

impl Default for IntervalMetrics {
    fn default() -> Self {
        IntervalMetrics { level: 0.95, fcr_q: 0.05, sabayes_flat: true, sabayes_random: true, posterior_nodes: 1201 }
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct ReplicationRow {
    pub rep: usize,
    pub R: usize,
    /// Selected units whose declared sign `sign(y)` disagrees with θ.
    pub V: usize,
    pub FDP: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fcp_unadjusted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fcp_fcr_adjusted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fcp_sabayes_flat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fcp_sabayes_random: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    pub se: Option<f64>,
}

/// Aggregates over replications. Standard errors are `sd / √n_reps` and are
/// `None` (with `se_defined = false`) for a single replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct ReplicationStats {
    pub n_reps: usize,
    pub m: usize,
    pub mean_R: f64,
    pub mean_V: f64,
    pub mean_FDP: f64,
    pub se_R: Option<f64>,
    pub se_V: Option<f64>,
    pub se_FDP: Option<f64>,
    pub se_defined: bool,
    /// `E V / E R` from the replication means.
    pub ev_over_er: f64,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Replication {
    pub stats: ReplicationStats,
    pub rows: Vec<ReplicationRow>,
}

/// Spacing in `y` of the credible-interval lookup tables.
pub const CI_TABLE_STEP: f64 = 0.01;

/// Credible-interval endpoints tabulated on an even `y` grid and linearly
/// interpolated.
struct CiTable {
    start: f64,
    step: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl CiTable {
    fn build<F>(a: f64, b: f64, f: F) -> Result<CiTable>
    where
        F: Fn(f64) -> Result<(f64, f64)> + Sync,
    {
        let n = if b > a { ((b - a) / CI_TABLE_STEP).ceil() as usize + 1 } else { 1 };
        let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
        let ends: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| f(if i + 1 == n { b } else { a + step * i as f64 }))
            .collect::<Result<_>>()?;
        let (lo, hi) = ends.into_iter().unzip();
        Ok(CiTable { start: a, step, lo, hi })
    }

    fn eval(&self, y: f64) -> (f64, f64) {
        if self.lo.len() == 1 {
            return (self.lo[0], self.hi[0]);
        }
        let x = ((y - self.start) / self.step).clamp(0.0, (self.lo.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.lo.len() - 2);
        let t = x - i as f64;
        (
            self.lo[i] + t * (self.lo[i + 1] - self.lo[i]),
            self.hi[i] + t * (self.hi[i + 1] - self.hi[i]),
        )
    }
}

fn prior_is_symmetric(p: &Prior) -> bool {
    match p {
        Prior::Normal { mean, .. } => *mean == 0.0,
        Prior::Laplace { .. } | Prior::Flat => true,
        Prior::PointMass { at } => *at == 0.0,
        Prior::Mixture { components } => components.iter().all(|c| prior_is_symmetric(&c.prior)),
        Prior::TwoGroup { alt, .. } => prior_is_symmetric(alt),
        Prior::ScaledInvChiSq { .. } => false,
    }
}

fn mirror(region: &Region) -> Region {
    Region::new(region.intervals.iter().map(|iv| Interval::new(-iv.hi, -iv.lo)).collect())
}

/// Coverage misses of interval `ci(y)` over the selected units.
fn fcp_of<F: Fn(f64) -> (f64, f64)>(sel: &[usize], theta: &[f64], y: &[f64], ci: F) -> f64 {
    if sel.is_empty() {
        return 0.0;
    }
    let miss = sel
        .iter()
        .filter(|&&i| {
            let (lo, hi) = ci(y[i]);
            !(lo <= theta[i] && theta[i] <= hi)
        })
        .count();
    miss as f64 / sel.len() as f64
}

/// Tables of credible intervals covering every selected `y`, one per sign
/// (or one over `|y|` when prior and region are symmetric).
fn posterior_ci_lookup<F>(sel_y: &[f64], symmetric: bool, f: F) -> Result<impl Fn(f64) -> (f64, f64)>
where
    F: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    let range = |ys: &mut dyn Iterator<Item = f64>| -> Option<(f64, f64)> {
        ys.fold(None, |acc, y| match acc {
            None => Some((y, y)),
            Some((a, b)) => Some((a.min(y), b.max(y))),
        })
    };
    let (pos, neg) = if symmetric {
        (range(&mut sel_y.iter().map(|y| y.abs())), None)
    } else {
        (range(&mut sel_y.iter().copied().filter(|y| *y >= 0.0)), range(&mut sel_y.iter().copied().filter(|y| *y < 0.0)))
    };
    let pos_table = pos.map(|(a, b)| CiTable::build(a, b, &f)).transpose()?;
    let neg_table = neg.map(|(a, b)| CiTable::build(a, b, &f)).transpose()?;
    Ok(move |y: f64| {
        if symmetric {
            let (lo, hi) = pos_table.as_ref().expect("table covers the selected units").eval(y.abs());
            if y < 0.0 {
                (-hi, -lo)
            } else {
                (lo, hi)
            }
        } else if y >= 0.0 {
            pos_table.as_ref().expect("table covers the selected units").eval(y)
        } else {
            neg_table.as_ref().expect("table covers the selected units").eval(y)
        }
    })
}

struct Context {
    sigma: f64,
    fixed_region: Option<Region>,
    opts: PosteriorOptions,
}

fn one_replication(
    spec: &GenerativeSpec,
    policy: &RulePolicy,
    metrics: Option<&IntervalMetrics>,
    ctx: &Context,
    rep: usize,
    rng: &RngStream,
) -> Result<ReplicationRow> {
    let (theta, y) = generate(spec, &rng.substream(rep as u64))?;
    let sigma = ctx.sigma;
    let (sel, region): (Vec<usize>, Region) = match policy {
        RulePolicy::Fixed { .. } => {
            let region = ctx.fixed_region.clone().expect("fixed policies carry a region");
            ((0..y.len()).filter(|&i| region.contains(y[i])).collect(), region)
        }
        RulePolicy::Bh { q } => {
            let p: Vec<f64> = y.iter().map(|v| (2.0 * normal_sf(v.abs() / sigma)).min(1.0)).collect();
            let bh = bh_procedure(&p, *q)?;
            let cut = bh.rejected.iter().map(|&i| y[i].abs()).fold(f64::INFINITY, f64::min);
            (bh.rejected, Region::two_sided(cut))
        }
    };
    let r = sel.len();
    let v = sel
        .iter()
        .filter(|&&i| if y[i] > 0.0 { theta[i] <= 0.0 } else { theta[i] >= 0.0 })
        .count();
    let mut row = ReplicationRow {
        rep,
        R: r,
        V: v,
        FDP: v as f64 / r.max(1) as f64,
        fcp_unadjusted: None,
        fcp_fcr_adjusted: None,
        fcp_sabayes_flat: None,
        fcp_sabayes_random: None,
    };
    let Some(mt) = metrics else {
        return Ok(row);
    };
    let z = normal_quantile(0.5 + 0.5 * mt.level)?;
    row.fcp_unadjusted = Some(fcp_of(&sel, &theta, &y, |v| (v - z * sigma, v + z * sigma)));
    if r > 0 {
        let alpha = r as f64 * mt.fcr_q / spec.m as f64;
        let za = normal_quantile(1.0 - 0.5 * alpha)?;
        row.fcp_fcr_adjusted = Some(fcp_of(&sel, &theta, &y, |v| (v - za * sigma, v + za * sigma)));
    } else {
        row.fcp_fcr_adjusted = Some(0.0);
    }
    if r == 0 {
        if mt.sabayes_flat {
            row.fcp_sabayes_flat = Some(0.0);
        }
        if mt.sabayes_random {
            row.fcp_sabayes_random = Some(0.0);
        }
        return Ok(row);
    }
    let sel_y: Vec<f64> = sel.iter().map(|&i| y[i]).collect();
    let region_symmetric = mirror(&region) == region;
    let rule = SelectionRule::Region { region };
    let interval = |kind: &EffectKind, prior: &Prior, at: f64| -> Result<(f64, f64)> {
        let s = sa_posterior_with(kind, prior, &spec.lik, &rule, at, &ctx.opts)?.summarize(mt.level)?;
        Ok((s.ci_lo, s.ci_hi))
    };
    if mt.sabayes_flat {
        let ci = posterior_ci_lookup(&sel_y, region_symmetric, |at| interval(&EffectKind::Fixed, &Prior::Flat, at))?;
        row.fcp_sabayes_flat = Some(fcp_of(&sel, &theta, &y, ci));
    }
    if mt.sabayes_random {
        let symmetric = region_symmetric && prior_is_symmetric(&spec.prior);
        let ci = posterior_ci_lookup(&sel_y, symmetric, |at| interval(&EffectKind::Random, &spec.prior, at))?;
        row.fcp_sabayes_random = Some(fcp_of(&sel, &theta, &y, ci));
    }
    Ok(row)
}

fn mean_se(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Run `n_reps` replications of `spec` under `policy`. Replication `k` draws
/// from `rng.substream(k)`, and rows are merged in replication order.
///
/// The random-effect credible intervals use the exchangeable prior of the
/// spec.
pub fn replicate(
    spec: &GenerativeSpec,
    policy: &RulePolicy,
    n_reps: usize,
    metrics: Option<&IntervalMetrics>,
    rng: &RngStream,
) -> Result<Replication> {
    spec.validate()?;
    if n_reps == 0 {
        return Err(Error::Domain("at least one replication is required".into()));
    }
    let sigma = spec.lik.sigma()?;
    let fixed_region = match policy {
        RulePolicy::Fixed { rule } => {
            rule.validate()?;
            Some(resolve_rule(rule, &spec.prior, &spec.lik)?.region(&spec.lik)?)
        }
        RulePolicy::Bh { q } => {
            if !(*q > 0.0 && *q <= 1.0) {
                return Err(Error::Domain(format!("BH level must lie in (0, 1], got {q}")));
            }
            None
        }
    };
    if let Some(mt) = metrics {
        if !(mt.level > 0.0 && mt.level < 1.0 && mt.fcr_q > 0.0 && mt.fcr_q < 1.0) {
            return Err(Error::Domain("interval levels must lie in (0, 1)".into()));
        }
    }
    let ctx = Context {
        sigma,
        fixed_region,
        opts: PosteriorOptions { nodes: metrics.map_or(1201, |m| m.posterior_nodes), ..PosteriorOptions::default() },
    };
    let rows: Vec<ReplicationRow> = (0..n_reps)
        .into_par_iter()
        .map(|k| one_replication(spec, policy, metrics, &ctx, k, rng))
        .collect::<Result<_>>()?;

    let col = |f: &dyn Fn(&ReplicationRow) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    let (mean_r, se_r) = mean_se(&col(&|r| r.R as f64));
    let (mean_v, se_v) = mean_se(&col(&|r| r.V as f64));
    let (mean_fdp, se_fdp) = mean_se(&col(&|r| r.FDP));
    let mut summaries = Vec::new();
    let named: [(&str, fn(&ReplicationRow) -> Option<f64>); 4] = [
        ("fcp_unadjusted", |r| r.fcp_unadjusted),
        ("fcp_fcr_adjusted", |r| r.fcp_fcr_adjusted),
        ("fcp_sabayes_flat", |r| r.fcp_sabayes_flat),
        ("fcp_sabayes_random", |r| r.fcp_sabayes_random),
    ];
    for (name, get) in named {
        let vals: Vec<f64> = rows.iter().filter_map(get).collect();
        if vals.len() == rows.len() {
            let (mean, se) = mean_se(&vals);
            summaries.push(MetricSummary { name: name.into(), mean, se });
        }
    }
    let stats = ReplicationStats {
        n_reps,
        m: spec.m,
        mean_R: mean_r,
        mean_V: mean_v,
        mean_FDP: mean_fdp,
        se_R: se_r,
        se_V: se_v,
        se_FDP: se_fdp,
        se_defined: n_reps >= 2,
        ev_over_er: if mean_r > 0.0 { mean_v / mean_r } else { 0.0 },
        metrics: summaries,
    };
    Ok(Replication { stats, rows })
}

impl ReplicationStats {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }
}
