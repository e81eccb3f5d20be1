use rayon::prelude::*;
use sabayes::microarray::{gene_posterior, ingest, moderated_t_rule, sign_error_probability, EbayesFit, EffectPrior, GeneRecord};
use sabayes::model::{Component, ConditionalPrior, Direction, EffectKind, Likelihood, Prior, SelectionRule};
use sabayes::multiplicity::{fcr_adjusted_cis, marginal_cis};
use sabayes::numerics::{find_root, RngStream};
use sabayes::posterior::{sa_posterior, unadjusted_posterior};
use sabayes::sim::{generate, sample_truncated, GenerativeSpec};
use sabayes::Error;
use serde_json::json;

use crate::args::FigureArgs;
use crate::commands::simulation::DEFAULT_M;
use crate::config::Ctx;
use crate::output::{Report, Table};
use crate::CliError;

/// Cutoff of the simulated selection `|y| > a`.
pub const SIM_CUTOFF: f64 = 3.111;
/// Cutoffs drawn in the gene figures.
pub const T_CUTOFFS: [f64; 2] = [4.479, 2.64];
pub const RHO_CUTOFFS: [f64; 2] = [0.05, 0.088];
/// Summary statistics of the highlighted gene when none is supplied.
pub const DEFAULT_GENE: (f64, f64) = (-0.435, 0.0173);

const CURVE_STEP: f64 = 0.05;

struct Rows(Table);

impl Rows {
    fn new() -> Self {
        Rows(Table::new(["panel", "series", "x", "value"]))
    }

    fn add(&mut self, panel: &str, series: &str, x: f64, value: f64) {
        self.0.push(vec![panel.into(), series.into(), x.into(), value.into()]);
    }
}

fn linspace(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).floor().max(0.0) as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

pub fn figure(ctx: &mut Ctx, a: &FigureArgs) -> Result<Report, CliError> {
    ctx.record("number", &a.number);
    let rows = match a.number {
        1 => scatter_with_cis(ctx, a, false)?,
        2 => truncated_panels(ctx, a)?,
        3 => posterior_curves(ctx, a)?,
        4 => scatter_with_cis(ctx, a, true)?,
        5 => gene_scatter(ctx, a)?,
        6 => gene_posteriors(ctx, a)?,
        _ => unreachable!("clap restricts the figure number"),
    };
    let t = rows.0;
    Ok(Report::json(&json!({ "figure": a.number, "rows": t.to_json() }))?.with_table(t).csv_by_default())
}

fn simulated(ctx: &mut Ctx, a: &FigureArgs) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let m = ctx.get("m", a.m, DEFAULT_M)?;
    Ok(generate(&GenerativeSpec::polygenic(m), &RngStream::new(ctx.seed, 0))?)
}

/// Figures 1 and 4: selected `(y, θ)` with marginal and FCR-adjusted
/// intervals; figure 4 keeps `y > a` and adds the two saBayes intervals.
fn scatter_with_cis(ctx: &mut Ctx, a: &FigureArgs, upper_only: bool) -> Result<Rows, CliError> {
    let (theta, y) = simulated(ctx, a)?;
    let m = y.len();
    let selected: Vec<(usize, f64, f64)> =
        y.iter().enumerate().filter(|(_, v)| v.abs() > SIM_CUTOFF).map(|(i, &v)| (i, v, 1.0)).collect();
    if selected.is_empty() {
        return Err(Error::DegenerateRule("no unit passes the selection".into()).into());
    }
    let marginal = marginal_cis(&selected, 0.95)?;
    let adjusted = fcr_adjusted_cis(&selected, 0.05, m)?;
    let mut rows = Rows::new();
    let panel = if upper_only { "upper" } else { "two_sided" };
    for ((s, mc), fc) in selected.iter().zip(&marginal).zip(&adjusted) {
        let yi = s.1;
        if upper_only && yi <= SIM_CUTOFF {
            continue;
        }
        rows.add(panel, "unit", yi, theta[s.0]);
        rows.add(panel, "ci95_lo", yi, mc.interval.lo);
        rows.add(panel, "ci95_hi", yi, mc.interval.hi);
        rows.add(panel, "fcr_lo", yi, fc.interval.lo);
        rows.add(panel, "fcr_hi", yi, fc.interval.hi);
    }
    if upper_only {
        let ymax = selected.iter().map(|s| s.1).fold(SIM_CUTOFF, f64::max);
        let rule = SelectionRule::TwoSided { a: SIM_CUTOFF };
        let lik = Likelihood::standard();
        let prior = Prior::example_mixture();
        let grid = linspace(SIM_CUTOFF, ymax + CURVE_STEP, CURVE_STEP);
        let curves: Vec<[f64; 4]> = grid
            .par_iter()
            .map(|&v| -> Result<[f64; 4], Error> {
                let r = sa_posterior(&EffectKind::Random, &prior, &lik, &rule, v)?.summarize(0.95)?;
                let f = sa_posterior(&EffectKind::Fixed, &Prior::Flat, &lik, &rule, v)?.summarize(0.95)?;
                Ok([r.ci_lo, r.ci_hi, f.ci_lo, f.ci_hi])
            })
            .collect::<Result<_, _>>()?;
        for (&v, c) in grid.iter().zip(&curves) {
            rows.add(panel, "random_lo", v, c[0]);
            rows.add(panel, "random_hi", v, c[1]);
            rows.add(panel, "flat_lo", v, c[2]);
            rows.add(panel, "flat_hi", v, c[3]);
        }
    }
    Ok(rows)
}

/// λ ∈ {10, 1} with probabilities 0.9 / 0.1.
fn rate_hyperprior() -> Prior {
    Prior::Mixture {
        components: vec![
            Component { weight: 0.9, prior: Prior::PointMass { at: 10.0 } },
            Component { weight: 0.1, prior: Prior::PointMass { at: 1.0 } },
        ],
    }
}

/// Figure 2: truncated realizations of `(θ₁, Y₁)` for each effect kind with
/// the adjusted posterior means and 0.95 intervals as curves in `y`.
fn truncated_panels(ctx: &mut Ctx, a: &FigureArgs) -> Result<Rows, CliError> {
    let n = ctx.get("n", a.n, 1000usize)?;
    let rule = SelectionRule::TwoSided { a: SIM_CUTOFF };
    let mixed = EffectKind::Mixed { hyperprior: rate_hyperprior(), conditional: ConditionalPrior::LaplaceRate };
    let kinds = [("random", EffectKind::Random), ("mixed", mixed), ("fixed", EffectKind::Fixed)];
    let root = RngStream::new(ctx.seed, 2);
    let prior = Prior::example_mixture();
    let lik = Likelihood::standard();
    let mut rows = Rows::new();
    for (k, (name, kind)) in kinds.iter().enumerate() {
        let spec = GenerativeSpec { m: 1, kind: kind.clone(), ..GenerativeSpec::polygenic(1) };
        let mut rng = root.substream(k as u64);
        let sample = sample_truncated(&spec, &rule, 0, n, &mut rng)?;
        let mut ymax = SIM_CUTOFF;
        for &(th, y) in &sample.pairs {
            if y > SIM_CUTOFF {
                rows.add(name, "unit", y, th);
                ymax = ymax.max(y);
            }
        }
        let grid = linspace(SIM_CUTOFF, ymax + CURVE_STEP, CURVE_STEP);
        let curves: Vec<[f64; 3]> = grid
            .par_iter()
            .map(|&v| -> Result<[f64; 3], Error> {
                let s = sa_posterior(kind, &prior, &lik, &rule, v)?.summarize(0.95)?;
                Ok([s.mean, s.ci_lo, s.ci_hi])
            })
            .collect::<Result<_, _>>()?;
        for (&v, c) in grid.iter().zip(&curves) {
            rows.add(name, "mean", v, c[0]);
            rows.add(name, "ci_lo", v, c[1]);
            rows.add(name, "ci_hi", v, c[2]);
        }
    }
    Ok(rows)
}

/// Figure 3: unadjusted, random-effect and flat-prior adjusted posterior
/// densities at chosen observations.
fn posterior_curves(ctx: &mut Ctx, a: &FigureArgs) -> Result<Rows, CliError> {
    let text = ctx.get("ys", a.ys.clone(), "3.40,5.59".to_string())?;
    let ys: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--ys expects comma-separated numbers, got '{text}'")))?;
    let rule = SelectionRule::TwoSided { a: SIM_CUTOFF };
    let lik = Likelihood::standard();
    let mut rows = Rows::new();
    for &y in &ys {
        let panel = format!("y={y}");
        let unadj = unadjusted_posterior(&Prior::Flat, &lik, y)?;
        let random = sa_posterior(&EffectKind::Random, &Prior::example_mixture(), &lik, &rule, y)?;
        let flat = sa_posterior(&EffectKind::Fixed, &Prior::Flat, &lik, &rule, y)?;
        let lo = y.min(0.0) - 4.0;
        let hi = y.max(0.0) + 4.0;
        for x in linspace(lo, hi, 0.01) {
            rows.add(&panel, "unadjusted", x, unadj.density_at(x));
            rows.add(&panel, "random", x, random.density_at(x));
            rows.add(&panel, "flat", x, flat.density_at(x));
        }
    }
    Ok(rows)
}

fn swirl_fit(ctx: &mut Ctx) -> EbayesFit {
    let fit = EbayesFit::swirl();
    ctx.record("fit", &fit);
    fit
}

fn records(ctx: &mut Ctx, a: &FigureArgs) -> Result<Vec<GeneRecord>, CliError> {
    match ctx.opt("input", a.input.clone(), None)? {
        Some(p) => Ok(ingest(&p)?.records),
        None => Ok(Vec::new()),
    }
}

/// The highlighted gene: `--gene` from the input, else `--ybar/--s2`, else
/// the default statistics.
fn highlighted(ctx: &mut Ctx, a: &FigureArgs, recs: &[GeneRecord]) -> Result<GeneRecord, CliError> {
    let id: Option<String> = ctx.opt("gene", a.gene.clone(), None)?;
    if let Some(id) = &id {
        if let Some(r) = recs.iter().find(|r| &r.id == id) {
            return Ok(r.clone());
        }
        if !recs.is_empty() {
            return Err(Error::Config(format!("gene '{id}' is not in the input")).into());
        }
    }
    let ybar = ctx.get("ybar", a.ybar, DEFAULT_GENE.0)?;
    let s2 = ctx.get("s2", a.s2, DEFAULT_GENE.1)?;
    let g = GeneRecord::new(id.unwrap_or_else(|| "gene".into()), ybar, s2);
    g.validate()?;
    Ok(g)
}

/// Figure 5: `(ȳ, s)` per gene with the `|t̃|` and `ρ̃` selection boundaries.
fn gene_scatter(ctx: &mut Ctx, a: &FigureArgs) -> Result<Rows, CliError> {
    let fit = swirl_fit(ctx);
    let recs = records(ctx, a)?;
    let marker = highlighted(ctx, a, &recs)?;
    let (n, df) = (marker.n, marker.df);
    let mut rows = Rows::new();
    for r in &recs {
        rows.add("genes", "gene", r.ybar, r.s2.sqrt());
    }
    rows.add("genes", "marker", marker.ybar, marker.s2.sqrt());
    let xmax = recs.iter().map(|r| r.ybar.abs()).fold(marker.ybar.abs(), f64::max).max(0.5) * 1.05;
    let xs: Vec<f64> = linspace(-xmax, xmax, xmax / 200.0).into_iter().filter(|x| x.abs() > 1e-9).collect();
    for a_t in T_CUTOFFS {
        let series = format!("modt_{a_t}");
        for &x in &xs {
            let st2 = n as f64 * x * x / (a_t * a_t);
            let s2 = ((fit.nu0 + df) * st2 - fit.nu0 * fit.s0sq) / df;
            if s2 > 0.0 {
                rows.add("genes", &series, x, s2.sqrt());
            }
        }
    }
    for c in RHO_CUTOFFS {
        let series = format!("rho_{c}");
        let pts: Vec<Option<f64>> = xs
            .par_iter()
            .map(|&x| {
                let g = |lv: f64| sign_error_probability(&fit, x, lv.exp(), n, df).map(|p| p - c).unwrap_or(f64::NAN);
                let (lo, hi) = (-20.0, 5.0);
                if g(lo) >= 0.0 || g(hi) <= 0.0 {
                    return None;
                }
                find_root(g, lo, hi, 1e-10).ok().map(|lv| (0.5 * lv).exp())
            })
            .collect();
        for (&x, p) in xs.iter().zip(&pts) {
            if let Some(s) = p {
                rows.add("genes", &series, x, *s);
            }
        }
    }
    Ok(rows)
}

/// Figure 6: posterior densities of the highlighted gene's effect.
fn gene_posteriors(ctx: &mut Ctx, a: &FigureArgs) -> Result<Rows, CliError> {
    let fit = swirl_fit(ctx);
    let recs = records(ctx, a)?;
    let g = highlighted(ctx, a, &recs)?;
    let mut curves = vec![
        ("flat".to_string(), gene_posterior(&g, &fit, None, &EffectPrior::Flat)?),
        ("laplace".to_string(), gene_posterior(&g, &fit, None, &EffectPrior::Laplace { rate: fit.laplace_rate })?),
    ];
    for a_t in T_CUTOFFS {
        let rule = moderated_t_rule(&fit, a_t, Direction::TwoSided);
        match gene_posterior(&g, &fit, Some(&rule), &EffectPrior::Flat) {
            Ok(p) => curves.push((format!("flat_modt_{a_t}"), p)),
            Err(Error::Precondition(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let scale = (fit.moderated_variance(g.s2, g.df) / g.n as f64).sqrt();
    let lo = g.ybar.min(0.0) - 5.0 * scale;
    let hi = g.ybar.max(0.0) + 5.0 * scale;
    let mut rows = Rows::new();
    for x in linspace(lo, hi, (hi - lo) / 800.0) {
        for (name, p) in &curves {
            rows.add(&g.id, name, x, p.density_at(x));
        }
    }
    Ok(rows)
}
