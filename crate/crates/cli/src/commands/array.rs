use sabayes::microarray::{
    bh_rejection_bound, count_discoveries, fit_laplace_rate, fit_variance_prior, gene_posterior, ingest, moderated_t,
    moderated_t_rule, DiscoveryRule, EbayesFit, EffectPrior, GeneRecord, GeneRiskTable, RejectedRow,
    DEFAULT_LAPLACE_RATE,
};
use sabayes::model::{Direction, Loss, SelectionRule};
use sabayes::posterior::Summary;
use sabayes::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::MicroarrayArgs;
use crate::config::Ctx;
use crate::output::{Cell, Report, Table};
use crate::CliError;

/// `modt:A` (|t̃| ≥ A), `rho:S` (ρ̃ ≤ S), `bh:Q`, `bh-raw:Q`, `all`, or any
/// selection rule in its long form.
pub fn parse_discovery(text: &str, fit: &EbayesFit) -> Result<DiscoveryRule, CliError> {
    let t = text.trim();
    let (head, rest) = t.split_once(':').unwrap_or((t, ""));
    let num = |what: &str| {
        rest.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{what} needs a number, got '{t}'")))
    };
    Ok(match head.to_ascii_lowercase().replace('_', "-").as_str() {
        "modt" if rest.trim().parse::<f64>().is_ok() => {
            DiscoveryRule::Rule { rule: moderated_t_rule(fit, num("modt")?, Direction::TwoSided) }
        }
        "rho" => DiscoveryRule::Rule { rule: SelectionRule::LossThreshold { loss: Loss::Directional, s: num("rho")? } },
        "bh" => DiscoveryRule::BhModerated { q: num("bh")? },
        "bh-raw" => DiscoveryRule::BhOrdinary { q: num("bh-raw")? },
        _ => DiscoveryRule::Rule { rule: crate::config::parse_component(t)? },
    })
}

#[derive(Serialize)]
struct FitReport {
    #[serde(flatten)]
    fit: EbayesFit,
    variance_prior: &'static str,
    laplace_rate: &'static str,
}

#[derive(Serialize)]
struct PosteriorRow {
    label: String,
    prior: EffectPrior,
    #[serde(skip_serializing_if = "Option::is_none")]
    rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

fn common_design(records: &[GeneRecord]) -> Option<(u32, f64)> {
    let first = records.first()?;
    records.iter().all(|r| r.n == first.n && r.df == first.df).then_some((first.n, first.df))
}

/// The moderated-t rule a discovery rule amounts to on this data set, for
/// risk and posterior computations.
fn as_selection_rule(rule: &DiscoveryRule, cutoff: Option<f64>, fit: &EbayesFit) -> Result<SelectionRule, String> {
    match rule {
        DiscoveryRule::Rule { rule } => Ok(rule.clone()),
        DiscoveryRule::BhModerated { .. } => match cutoff {
            Some(a) => Ok(moderated_t_rule(fit, a, Direction::TwoSided)),
            None => Err("BH made no discoveries".into()),
        },
        DiscoveryRule::BhOrdinary { .. } => Err("BH on ordinary t is not a moderated-t region".into()),
    }
}

pub fn microarray(ctx: &mut Ctx, a: &MicroarrayArgs) -> Result<Report, CliError> {
    let input = ctx.opt("input", a.input.clone(), None)?;
    let (records, rejected): (Vec<GeneRecord>, Vec<RejectedRow>) = match &input {
        Some(p) => {
            let ing = ingest(p)?;
            (ing.records, ing.rejected)
        }
        None => (Vec::new(), Vec::new()),
    };
    let nu0: Option<f64> = ctx.opt("nu0", a.nu0, None)?;
    let s0sq: Option<f64> = ctx.opt("s0sq", a.s0sq, None)?;
    let override_ = match (nu0, s0sq) {
        (Some(x), Some(y)) => Some((x, y)),
        (None, None) => None,
        _ => return Err(CliError::Usage("--nu0 and --s0sq must be given together".into())),
    };
    if override_.is_none() && records.is_empty() {
        return Err(CliError::Usage("without --input the variance prior must be given by --nu0 and --s0sq".into()));
    }
    let (nu0, s0sq) = fit_variance_prior(&records, override_)?;
    let fit_rate = ctx.flag("fit_rate", a.fit_rate)?;
    let rate_flag: Option<f64> = ctx.opt("rate", a.rate, None)?;
    let (rate, rate_source) = match (rate_flag, fit_rate) {
        (Some(r), _) => (r, "given"),
        (None, true) => (fit_laplace_rate(&records, nu0, s0sq)?, "fitted"),
        (None, false) => (DEFAULT_LAPLACE_RATE, "default"),
    };
    let fit = EbayesFit::new(nu0, s0sq, rate)?;
    let (n, df) = match (ctx.opt::<u32>("n", a.n, None)?, ctx.opt::<f64>("df", a.df, None)?) {
        (Some(n), Some(df)) => (n, df),
        (n, df) => {
            let (cn, cdf) = common_design(&records).unwrap_or((4, 3.0));
            (n.unwrap_or(cn), df.unwrap_or(cdf))
        }
    };
    let level = ctx.get("level", a.level, 0.95)?;
    let rule_texts: Vec<String> = ctx.get("rules", (!a.rules.is_empty()).then(|| a.rules.clone()), Vec::new())?;
    let rules: Vec<DiscoveryRule> = rule_texts.iter().map(|t| parse_discovery(t, &fit)).collect::<Result<_, _>>()?;

    let mut doc = json!({
        "fit": FitReport { fit, variance_prior: if override_.is_some() { "given" } else { "fitted" }, laplace_rate: rate_source },
        "design": { "n": n, "df": df },
        "records": records.len(),
        "rejected": rejected,
    });

    let mut cutoffs = vec![None; rules.len()];
    let mut flags: Vec<Vec<bool>> = Vec::new();
    if !records.is_empty() {
        let mut out = Vec::new();
        for (i, (text, rule)) in rule_texts.iter().zip(&rules).enumerate() {
            let d = count_discoveries(&records, rule, &fit)?;
            cutoffs[i] = d.t_cutoff;
            let mut f = vec![false; records.len()];
            for &k in &d.selected {
                f[k] = true;
            }
            flags.push(f);
            let mut entry = json!({ "rule": text, "count": d.count, "t_cutoff": d.t_cutoff });
            if let DiscoveryRule::BhOrdinary { q } = rule {
                entry["t_bound"] = json!(bh_rejection_bound(records.len(), *q, df)?);
            }
            out.push(entry);
        }
        doc["discoveries"] = Value::Array(out);
    }

    let want_risk = ctx.flag("risk", a.risk)?;
    let calibrate: Option<f64> = ctx.opt("calibrate", a.calibrate, None)?;
    let table = if want_risk || calibrate.is_some() { Some(GeneRiskTable::build(&fit, n, df)?) } else { None };
    if let Some(tab) = &table {
        if want_risk {
            let mut out = Vec::new();
            for (i, (text, rule)) in rule_texts.iter().zip(&rules).enumerate() {
                let entry = match as_selection_rule(rule, cutoffs[i], &fit) {
                    Ok(sr) => json!({ "rule": text, "report": tab.risk(&sr)? }),
                    Err(why) => json!({ "rule": text, "skipped": why }),
                };
                out.push(entry);
            }
            doc["risks"] = Value::Array(out);
        }
        if let Some(q) = calibrate {
            doc["calibration"] = json!({
                "target": q,
                "moderated_t": tab.calibrate_moderated_t(q)?,
                "loss_threshold": tab.calibrate_loss_threshold(q)?,
            });
        }
    }

    let gene_id: Option<String> = ctx.opt("gene", a.gene.clone(), None)?;
    let ybar: Option<f64> = ctx.opt("ybar", a.ybar, None)?;
    let s2: Option<f64> = ctx.opt("s2", a.s2, None)?;
    let gene = match (&gene_id, ybar, s2) {
        (_, Some(y), Some(s)) => Some(GeneRecord { id: gene_id.clone().unwrap_or_else(|| "gene".into()), ybar: y, s2: s, n, df }),
        (Some(id), None, None) => Some(
            records
                .iter()
                .find(|r| &r.id == id)
                .cloned()
                .ok_or_else(|| Error::Config(format!("gene '{id}' is not in the input")))?,
        ),
        (_, None, None) => None,
        _ => return Err(CliError::Usage("--ybar and --s2 must be given together".into())),
    };
    if let Some(g) = gene {
        g.validate()?;
        doc["gene"] = gene_report(&g, &fit, &rule_texts, &rules, &cutoffs, level)?;
    }

    let mut cols: Vec<String> = ["id", "ybar", "s2", "n", "df", "t", "p"].iter().map(|s| s.to_string()).collect();
    cols.extend(rule_texts.iter().cloned());
    let mut t = Table::new(cols);
    for (k, r) in records.iter().enumerate() {
        let st = moderated_t(r, &fit);
        let mut row: Vec<Cell> =
            vec![r.id.clone().into(), r.ybar.into(), r.s2.into(), (r.n as usize).into(), r.df.into(), st.t.into(), st.p.into()];
        row.extend(flags.iter().map(|f| Cell::Bool(f[k])));
        t.push(row);
    }
    if ctx.flag("genes", a.genes)? {
        doc["genes"] = t.to_json();
    }
    Ok(Report::json(&doc)?.with_table(t))
}

fn gene_report(
    g: &GeneRecord,
    fit: &EbayesFit,
    rule_texts: &[String],
    rules: &[DiscoveryRule],
    cutoffs: &[Option<f64>],
    level: f64,
) -> Result<Value, CliError> {
    let st = moderated_t(g, fit);
    let mut rows = vec![
        PosteriorRow {
            label: "flat".into(),
            prior: EffectPrior::Flat,
            rule: None,
            summary: Some(gene_posterior(g, fit, None, &EffectPrior::Flat)?.summarize(level)?),
            skipped: None,
        },
        PosteriorRow {
            label: "laplace".into(),
            prior: EffectPrior::Laplace { rate: fit.laplace_rate },
            rule: None,
            summary: Some(gene_posterior(g, fit, None, &EffectPrior::Laplace { rate: fit.laplace_rate })?.summarize(level)?),
            skipped: None,
        },
    ];
    for (i, (text, rule)) in rule_texts.iter().zip(rules).enumerate() {
        let mut row = PosteriorRow { label: format!("flat|{text}"), prior: EffectPrior::Flat, rule: Some(text.clone()), summary: None, skipped: None };
        match as_selection_rule(rule, cutoffs[i], fit) {
            Err(why) => row.skipped = Some(why),
            Ok(sr) => match gene_posterior(g, fit, Some(&sr), &EffectPrior::Flat) {
                Ok(p) => row.summary = Some(p.summarize(level)?),
                Err(e @ (Error::Unsupported(_) | Error::Precondition(_))) => row.skipped = Some(e.to_string()),
                Err(e) => return Err(e.into()),
            },
        }
        rows.push(row);
    }
    Ok(json!({ "id": g.id, "ybar": g.ybar, "s2": g.s2, "t": st.t, "p": st.p, "df_total": st.df, "posteriors": rows }))
}
