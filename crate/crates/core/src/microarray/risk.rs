use rayon::prelude::*;
use serde::Serialize;

use super::fit::EbayesFit;
use super::kernel::{log_density_log_s2, ConditionalNodes, CONDITIONAL_NODES};
use super::stats::moderated_t_rule;
use crate::error::{Error, Result};
use crate::model::{Direction, Loss, SelectionRule, Statistic};
use crate::numerics::quadrature::Grid;
use crate::numerics::roots::find_root;
use crate::risk::{RiskDiagnostics, RiskReport};

/// Grid sizes of the `(log s², t̃)` tabulation behind [`gene_risk`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskGridOptions {
    /// Simpson nodes in `v = log s²`.
    pub v_nodes: usize,
    /// Half-range in `v` below and above `log s₀²`.
    pub v_below: f64,
    pub v_above: f64,
    /// Uniform spacing of `t̃` on `[0, t_uniform_max]`.
    pub t_step: f64,
    pub t_uniform_max: f64,
    /// Geometrically spaced nodes on `[t_uniform_max, t_max]`.
    pub t_tail_nodes: usize,
    pub t_max: f64,
    /// χ² nodes for σ² given s².
    pub sigma_nodes: usize,
}

impl Default for RiskGridOptions {
    fn default() -> Self {
        RiskGridOptions {
            v_nodes: 121,
            v_below: 25.0,
            v_above: 20.0,
            t_step: 0.02,
            t_uniform_max: 15.0,
            t_tail_nodes: 120,
            t_max: 400.0,
            sigma_nodes: CONDITIONAL_NODES,
        }
    }
}

/// Joint density of `(log s², t̃)` for `ȳ ≥ 0` and the directional posterior
/// risk `ρ̃` on a tensor grid. Rules that are symmetric in the sign of `ȳ` are
/// evaluated on this half.
#[derive(Debug, Clone)]
pub struct GeneRiskTable {
    pub fit: EbayesFit,
    pub n: u32,
    pub df: f64,
    /// Simpson weight times the density of `v`.
    vw: Vec<f64>,
    t: Vec<f64>,
    /// `p(t̃ | s²)` per slice.
    dens: Vec<Vec<f64>>,
    /// `p(t̃ | s²) ρ̃` per slice.
    wrong: Vec<Vec<f64>>,
}

/// Upper-half integrals of the joint density and of the sign-error mass.
#[derive(Debug, Clone, Copy)]
struct HalfMass {
    selected: f64,
    wrong: f64,
}

impl GeneRiskTable {
    pub fn build(fit: &EbayesFit, n: u32, df: f64) -> Result<Self> {
        Self::build_with(fit, n, df, &RiskGridOptions::default())
    }

    pub fn build_with(fit: &EbayesFit, n: u32, df: f64, o: &RiskGridOptions) -> Result<Self> {
        fit.validate()?;
        if n < 2 || !(df >= 1.0) {
            return Err(Error::Domain(format!("need n >= 2 and df >= 1, got n = {n}, df = {df}")));
        }
        let c = fit.s0sq.ln();
        let vg = Grid::simpson(c - o.v_below, c + o.v_above, o.v_nodes)?;
        let v = vg.nodes().to_vec();
        let vw: Vec<f64> = v.iter().zip(vg.weights()).map(|(&x, &w)| w * log_density_log_s2(fit, df, x).exp()).collect();
        let n_uniform = (o.t_uniform_max / o.t_step).round() as usize;
        let mut t: Vec<f64> = (0..=n_uniform).map(|i| o.t_uniform_max * i as f64 / n_uniform as f64).collect();
        let ratio = (o.t_max / o.t_uniform_max).powf(1.0 / o.t_tail_nodes as f64);
        for i in 1..=o.t_tail_nodes {
            t.push(o.t_uniform_max * ratio.powi(i as i32));
        }
        let nodes = ConditionalNodes::new(fit.nu0 + df, o.sigma_nodes)?;
        let slices: Vec<(Vec<f64>, Vec<f64>)> = v
            .par_iter()
            .map(|&vv| {
                let st2 = fit.moderated_variance(vv.exp(), df);
                let st = (st2 / n as f64).sqrt();
                let mut d = Vec::with_capacity(t.len());
                let mut w = Vec::with_capacity(t.len());
                for &tt in &t {
                    let (all, wrong) = nodes.log_parts(fit.laplace_rate, tt * st, st2, n);
                    d.push((all + st.ln()).exp());
                    w.push((wrong + st.ln()).exp());
                }
                (d, w)
            })
            .collect();
        let (dens, wrong) = slices.into_iter().unzip();
        Ok(GeneRiskTable { fit: *fit, n, df, vw, t, dens, wrong })
    }

    /// Integrates over the part of each slice where `g(slice, t) ≤ 0`, with
    /// `g` and the integrands linear within each cell.
    fn half_mass<G: Fn(usize, usize) -> f64>(&self, g: G) -> HalfMass {
        let mut selected = 0.0;
        let mut wrong = 0.0;
        for (k, &vw) in self.vw.iter().enumerate() {
            if vw == 0.0 {
                continue;
            }
            let (d, w) = (&self.dens[k], &self.wrong[k]);
            let (mut sd, mut sw) = (0.0, 0.0);
            for i in 0..self.t.len() - 1 {
                let h = self.t[i + 1] - self.t[i];
                let (g0, g1) = (g(k, i), g(k, i + 1));
                let (a, b) = if g0 <= 0.0 && g1 <= 0.0 {
                    (0.0, 1.0)
                } else if g0 > 0.0 && g1 > 0.0 {
                    continue;
                } else {
                    let x = g0 / (g0 - g1);
                    if g0 <= 0.0 {
                        (0.0, x)
                    } else {
                        (x, 1.0)
                    }
                };
                let lin = |f: &[f64]| {
                    let fa = f[i] + a * (f[i + 1] - f[i]);
                    let fb = f[i] + b * (f[i + 1] - f[i]);
                    0.5 * (fa + fb) * (b - a) * h
                };
                sd += lin(d);
                sw += lin(w);
            }
            selected += vw * sd;
            wrong += vw * sw;
        }
        HalfMass { selected, wrong }
    }

    /// `ρ̃` on the table grid.
    fn rho(&self, k: usize, i: usize) -> f64 {
        let d = self.dens[k][i];
        if d > 0.0 {
            self.wrong[k][i] / d
        } else {
            0.5
        }
    }

    /// saBayes directional risk of `rule`, averaged over the selected part of
    /// the prior predictive of `(ȳ, s²)`.
    pub fn risk(&self, rule: &SelectionRule) -> Result<RiskReport> {
        let (mass, sides) = match rule {
            SelectionRule::All => (self.half_mass(|_, _| -1.0), 2.0),
            SelectionRule::StatThreshold { stat: Statistic::ModeratedT { nu0, s0sq }, s, direction } => {
                if (*nu0 - self.fit.nu0).abs() > 1e-12 || (*s0sq - self.fit.s0sq).abs() > 1e-12 {
                    return Err(Error::Unsupported("the rule's moderated t must use the fitted variance prior".into()));
                }
                let sides = if *direction == Direction::TwoSided { 2.0 } else { 1.0 };
                let a = *s;
                (self.half_mass(|_, i| a - self.t[i]), sides)
            }
            SelectionRule::LossThreshold { loss: Loss::Directional, s } => {
                let s = *s;
                (self.half_mass(|k, i| self.rho(k, i) - s), 2.0)
            }
            other => return Err(Error::Unsupported(format!("rule {other} does not apply to gene summaries"))),
        };
        if !(mass.selected > 0.0) {
            return Err(Error::DegenerateRule(format!("rule {rule} selects no gene under the fitted prior")));
        }
        let risk = mass.wrong / mass.selected;
        let selection_prob = (sides * mass.selected).min(1.0);
        Ok(RiskReport {
            rule: rule.clone(),
            risk,
            selection_prob,
            expected_discoveries: selection_prob,
            loss: Loss::Directional,
            diagnostics: RiskDiagnostics { m: 1.0, expected_false_discoveries: risk * selection_prob, ev_over_er: risk, region: None },
        })
    }

    /// Cutoff `a` of `|t̃| ≥ a` with risk `q`.
    pub fn calibrate_moderated_t(&self, q: f64) -> Result<GeneCalibration> {
        let mk = |a: f64| moderated_t_rule(&self.fit, a, Direction::TwoSided);
        self.calibrate(q, 0.0, 20.0, mk)
    }

    /// Cutoff `s` of `ρ̃ ≤ s` with risk `q`.
    pub fn calibrate_loss_threshold(&self, q: f64) -> Result<GeneCalibration> {
        let mk = |s: f64| SelectionRule::LossThreshold { loss: Loss::Directional, s };
        self.calibrate(q, 1e-9, 0.5, mk)
    }

    /// Root of `risk − q` in the first probe interval where the risk crosses
    /// `q`, scanning up from `lo`. The risk of moderated-t cutoffs is not
    /// monotone: far in the tail large `|t̃|` come mostly from high-variance
    /// genes whose effect posterior reverts to the prior.
    fn calibrate<F: Fn(f64) -> SelectionRule>(&self, q: f64, lo: f64, hi: f64, mk: F) -> Result<GeneCalibration> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("target risk must lie in (0, 1), got {q}")));
        }
        let r = |p: f64| self.risk(&mk(p)).map(|x| x.risk).unwrap_or(f64::NAN);
        let probes: Vec<(f64, f64)> = (0..=CALIBRATION_PROBES)
            .map(|i| {
                let p = lo + (hi - lo) * i as f64 / CALIBRATION_PROBES as f64;
                (p, r(p))
            })
            .filter(|x| x.1.is_finite())
            .collect();
        let min_risk = probes.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let max_risk = probes.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let Some(w) = probes.windows(2).find(|w| (w[0].1 - q) * (w[1].1 - q) <= 0.0) else {
            return Err(Error::Calibration { target: q, min_risk, max_risk });
        };
        let p = find_root(|p| r(p) - q, w[0].0, w[1].0, 1e-10)?;
        Ok(GeneCalibration { parameter: p, report: self.risk(&mk(p))? })
    }
}

/// Probes of the risk curve before the root search.
pub const CALIBRATION_PROBES: usize = 40;

#[derive(Debug, Clone, Serialize)]
pub struct GeneCalibration {
    pub parameter: f64,
    pub report: RiskReport,
}

/// [`GeneRiskTable::risk`] on a freshly built table.
pub fn gene_risk(rule: &SelectionRule, fit: &EbayesFit, n: u32, df: f64) -> Result<RiskReport> {
    GeneRiskTable::build(fit, n, df)?.risk(rule)
}
