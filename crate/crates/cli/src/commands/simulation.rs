use std::path::PathBuf;

use sabayes::model::SelectionRule;
use sabayes::numerics::RngStream;
use sabayes::sim::{generate, replicate as run_replications, sample_truncated, GenerativeSpec, IntervalMetrics, RulePolicy};
use serde_json::json;

use crate::args::{ReplicateArgs, SimulateArgs, SpecArgs};
use crate::config::{parse_component, Ctx};
use crate::output::{write_table, Report, Table};
use crate::CliError;

/// Units in the built-in specifications.
pub const DEFAULT_M: usize = 100_000;

pub fn preset(name: &str, m: usize) -> Result<GenerativeSpec, CliError> {
    match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
        "mixture" => Ok(GenerativeSpec::polygenic(m)),
        "mixture-blocks" | "blocks" => Ok(GenerativeSpec::polygenic_blocks(m)),
        other => Err(CliError::Usage(format!("unknown preset '{other}' (expected mixture or mixture-blocks)"))),
    }
}

/// `--spec`, else `--preset` (default `mixture`); `--m` resizes either.
pub fn resolve_spec(ctx: &mut Ctx, a: &SpecArgs) -> Result<GenerativeSpec, CliError> {
    let m: Option<usize> = ctx.opt("m", a.m, None)?;
    let mut spec = match ctx.json_file::<GenerativeSpec>("spec", a.spec.as_deref())? {
        Some(s) => s,
        None => {
            let name = ctx.get("preset", a.preset.clone(), "mixture".to_string())?;
            preset(&name, m.unwrap_or(DEFAULT_M))?
        }
    };
    if let Some(m) = m {
        if spec.m != m {
            if spec.non_exchangeable.is_some() {
                return Err(CliError::Usage("--m cannot resize a specification with per-unit prior blocks".into()));
            }
            spec.m = m;
        }
    }
    spec.validate()?;
    ctx.record("spec", &spec);
    Ok(spec)
}

pub fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> Result<Report, CliError> {
    let spec = resolve_spec(ctx, &a.spec)?;
    let rule: Option<SelectionRule> = ctx.component("rule", a.rule.as_deref(), None)?;
    let rng = RngStream::new(ctx.seed, 0);
    match rule {
        None => {
            let (theta, y) = generate(&spec, &rng)?;
            let mut t = Table::new(["index", "theta", "y"]);
            for (i, (&th, &yy)) in theta.iter().zip(&y).enumerate() {
                t.push(vec![i.into(), th.into(), yy.into()]);
            }
            Ok(Report::json(&json!({ "m": spec.m, "rows": t.to_json() }))?.with_table(t).csv_by_default())
        }
        Some(rule) => {
            let target = ctx.get("target", a.target, 0usize)?;
            let n: usize = ctx.require("n", a.n)?;
            let mut rng = rng;
            let s = sample_truncated(&spec, &rule, target, n, &mut rng)?;
            let mut t = Table::new(["draw", "theta", "y"]);
            for (i, &(th, yy)) in s.pairs.iter().enumerate() {
                t.push(vec![i.into(), th.into(), yy.into()]);
            }
            let res = json!({
                "attempts": s.attempts,
                "acceptance_rate": s.acceptance_rate,
                "rows": t.to_json(),
            });
            Ok(Report::json(&res)?
                .with_table(t)
                .note("attempts", &s.attempts)
                .note("acceptance_rate", &s.acceptance_rate)
                .csv_by_default())
        }
    }
}

/// `bh:Q` or any selection rule.
pub fn parse_policy(text: &str) -> Result<RulePolicy, CliError> {
    let t = text.trim();
    if let Some(q) = t.strip_prefix("bh:") {
        let q = q.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bh policy needs a level, got '{t}'")))?;
        return Ok(RulePolicy::Bh { q });
    }
    Ok(RulePolicy::Fixed { rule: parse_component(t)? })
}

pub fn replicate(ctx: &mut Ctx, a: &ReplicateArgs) -> Result<Report, CliError> {
    let spec = resolve_spec(ctx, &a.spec)?;
    let policy_text = ctx.require::<String>("rule", a.rule.clone())?;
    let policy = parse_policy(&policy_text)?;
    ctx.record("policy", &policy);
    let reps = ctx.get("reps", a.reps, 50usize)?;
    let metrics = if ctx.flag("coverage", a.coverage)? { Some(IntervalMetrics::default()) } else { None };
    if let Some(m) = &metrics {
        ctx.record("metrics", m);
    }
    let rng = RngStream::new(ctx.seed, 1);
    let rep = run_replications(&spec, &policy, reps, metrics.as_ref(), &rng)?;

    let mut cols = vec!["rep", "R", "V", "FDP"];
    if metrics.is_some() {
        cols.extend(["fcp_unadjusted", "fcp_fcr_adjusted", "fcp_sabayes_flat", "fcp_sabayes_random"]);
    }
    let mut t = Table::new(cols);
    for r in &rep.rows {
        let mut row = vec![r.rep.into(), r.R.into(), r.V.into(), r.FDP.into()];
        if metrics.is_some() {
            for v in [r.fcp_unadjusted, r.fcp_fcr_adjusted, r.fcp_sabayes_flat, r.fcp_sabayes_random] {
                row.push(v.unwrap_or(f64::NAN).into());
            }
        }
        t.push(row);
    }
    let rows_path: Option<PathBuf> = ctx.opt("rows", a.rows.clone(), None)?;
    if let Some(p) = rows_path {
        write_table(ctx, &t, &[("stats".into(), serde_json::to_value(&rep.stats)?)], &p)?;
    }
    Ok(Report::json(&json!({ "stats": rep.stats, "rows": rep.rows }))?.with_table(t).note("stats", &rep.stats))
}
