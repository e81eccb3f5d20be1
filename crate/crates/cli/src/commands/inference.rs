use sabayes::model::{EffectKind, Loss, SelectionRule};
use sabayes::posterior::{
    compound_selection_posterior, freq_selective_ci, sa_posterior_with, unadjusted_posterior, CompoundSetup,
    PosteriorGrid, PosteriorOptions, Summary,
};
use sabayes::risk::{calibrate_rule, sabayes_risk, RiskReport, RuleFamily};
use serde::Serialize;
use serde_json::json;

use crate::args::{CalibrateArgs, FreqCiArgs, PosteriorArgs, RiskArgs};
use crate::config::Ctx;
use crate::output::{Cell, Report, Table};
use crate::CliError;

#[derive(Serialize)]
struct PosteriorResult {
    y: f64,
    kind: &'static str,
    rule: String,
    level: f64,
    summary: Summary,
    /// Point masses of the posterior as `(location, probability)`.
    atoms: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unadjusted: Option<Summary>,
}

fn density_table(post: &PosteriorGrid) -> Table {
    let mut t = Table::new(["theta", "density"]);
    for (&x, &d) in post.nodes().iter().zip(post.density()) {
        t.push(vec![x.into(), d.into()]);
    }
    t
}

pub fn posterior(ctx: &mut Ctx, a: &PosteriorArgs) -> Result<Report, CliError> {
    let level = ctx.get("level", a.level, 0.95)?;
    if let Some(pair) = ctx.opt::<String>("compound", a.compound.clone(), None)? {
        return compound(ctx, a, &pair, level);
    }
    let (prior, lik, kind) =
        ctx.model(a.model.model.as_deref(), a.model.prior.as_deref(), a.model.sigma, a.kind.as_deref(), None)?;
    let rule: SelectionRule = ctx.component("rule", a.rule.as_deref(), Some(SelectionRule::All))?.unwrap();
    let y: f64 = ctx.require("y", a.y)?;
    let mut opts = PosteriorOptions::default();
    if let Some(n) = ctx.opt("nodes", a.nodes, None)? {
        opts.nodes = n;
    }
    let post = sa_posterior_with(&kind, &prior, &lik, &rule, y, &opts)?;
    let unadjusted = if ctx.flag("unadjusted", a.unadjusted)? {
        Some(unadjusted_posterior(&prior, &lik, y)?.summarize(level)?)
    } else {
        None
    };
    let effective = if prior.is_flat() { "fixed" } else { kind.name() };
    let res = PosteriorResult {
        y,
        kind: effective,
        rule: rule.label(),
        level,
        summary: post.summarize(level)?,
        atoms: post.atoms().to_vec(),
        unadjusted,
    };
    let table = density_table(&post);
    Ok(Report::json(&res)?.with_table(table).note("atoms", &res.atoms))
}

fn compound(ctx: &mut Ctx, a: &PosteriorArgs, pair: &str, level: f64) -> Result<Report, CliError> {
    let ys: Vec<f64> = pair
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--compound expects Y1,Y2, got '{pair}'")))?;
    let [y1, y2] = ys[..] else {
        return Err(CliError::Usage(format!("--compound expects Y1,Y2, got '{pair}'")));
    };
    let hyper_var = ctx.require("hyper_var", a.hyper_var)?;
    let sampling_var = ctx.get("sampling_var", a.sampling_var, 1.0)?;
    let kind: EffectKind = match a.kind.as_deref() {
        Some(k) => crate::config::parse_component(k)?,
        None => EffectKind::Random,
    };
    ctx.record("kind", &kind);
    let mut setup = CompoundSetup::new(hyper_var, (y1, y2), sampling_var);
    setup.level = level;
    if let Some(n) = ctx.opt("nodes", a.nodes, None)? {
        setup.nodes = n;
    }
    Ok(Report::json(&compound_selection_posterior(&setup, &kind)?)?)
}

pub fn freq_ci(ctx: &mut Ctx, a: &FreqCiArgs) -> Result<Report, CliError> {
    let lik = ctx.likelihood(a.sigma)?;
    let rule: SelectionRule = ctx.component("rule", a.rule.as_deref(), Some(SelectionRule::All))?.unwrap();
    let y: f64 = ctx.require("y", a.y)?;
    let alpha = ctx.get("alpha", a.alpha, 0.05)?;
    let ci = freq_selective_ci(&lik, &rule, y, alpha)?;
    let mut t = Table::new(["lo", "hi"]);
    for iv in &ci.intervals {
        t.push(vec![iv.lo.into(), iv.hi.into()]);
    }
    Ok(Report::json(&json!({ "y": y, "rule": rule.label(), "ci": ci }))?.with_table(t))
}

fn report_table(r: &RiskReport) -> Table {
    let mut t = Table::new(["rule", "risk", "selection_prob", "expected_discoveries", "loss"]);
    t.push(vec![
        r.rule.label().into(),
        r.risk.into(),
        r.selection_prob.into(),
        r.expected_discoveries.into(),
        r.loss.to_string().into(),
    ]);
    t
}

pub fn risk(ctx: &mut Ctx, a: &RiskArgs) -> Result<Report, CliError> {
    let (prior, lik, _) = ctx.model(a.model.model.as_deref(), a.model.prior.as_deref(), a.model.sigma, None, None)?;
    ctx.forget("kind");
    let rule: SelectionRule = ctx.component("rule", a.rule.as_deref(), None)?.ok_or_else(|| CliError::Usage("missing --rule".into()))?;
    let loss: Loss = ctx.component("loss", a.loss.as_deref(), Some(Loss::Directional))?.unwrap();
    let m = ctx.get("m", a.m, 1.0)?;
    let report = sabayes_risk(&prior, &lik, &rule, &loss)?.with_m(m);
    let t = report_table(&report);
    Ok(Report::json(&json!({ "report": report, "diagnostics": report.diagnostics }))?.with_table(t))
}

pub fn calibrate(ctx: &mut Ctx, a: &CalibrateArgs) -> Result<Report, CliError> {
    let (prior, lik, _) = ctx.model(a.model.model.as_deref(), a.model.prior.as_deref(), a.model.sigma, None, None)?;
    ctx.forget("kind");
    let family: RuleFamily = ctx.require::<String>("family", a.family.clone())?.parse()?;
    let loss: Loss = ctx.component("loss", a.loss.as_deref(), Some(Loss::Directional))?.unwrap();
    let q: f64 = ctx.require("q", a.q)?;
    let m = ctx.get("m", a.m, 1.0)?;
    let mut c = calibrate_rule(&family, &prior, &lik, &loss, q)?;
    c.report = c.report.with_m(m);
    let mut t = Table::new(["family", "target", "parameter", "risk", "selection_prob", "expected_discoveries"]);
    t.push(vec![
        serde_json::to_value(&c.family)?.as_str().unwrap_or("").into(),
        q.into(),
        c.parameter.map(Cell::Num).unwrap_or_else(|| Cell::Text(String::new())),
        c.report.risk.into(),
        c.report.selection_prob.into(),
        c.report.expected_discoveries.into(),
    ]);
    Ok(Report::json(&json!({ "calibration": c, "diagnostics": c.report.diagnostics }))?.with_table(t))
}
