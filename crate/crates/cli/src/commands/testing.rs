use std::path::{Path, PathBuf};

use sabayes::multiplicity::{bh_procedure, fcr_adjusted_cis, CoverageLedger};
use sabayes::Error;
use serde_json::json;

use crate::args::{BhArgs, FcrArgs};
use crate::config::Ctx;
use crate::output::{Report, Table};
use crate::CliError;

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, Error> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot open {}: {e}", path.display()))))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file))
}

fn number(field: &str, line: u64, column: &str) -> Result<f64, Error> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Parse { line, message: format!("column '{column}': '{field}' is not a number") })
}

/// The p-value column of a CSV file: `p`, else `pvalue`, else the first.
pub fn read_pvalues(path: &Path) -> Result<Vec<f64>, Error> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let col = ["p", "pvalue", "p_value"]
        .iter()
        .find_map(|name| headers.iter().position(|h| h.eq_ignore_ascii_case(name)))
        .unwrap_or(0);
    let name = headers.get(col).unwrap_or("p").to_string();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = rec.get(col).ok_or_else(|| Error::Parse { line, message: format!("missing column '{name}'") })?;
        out.push(number(field, line, &name)?);
    }
    Ok(out)
}

pub fn bh(ctx: &mut Ctx, a: &BhArgs) -> Result<Report, CliError> {
    let q: f64 = ctx.require("q", a.q)?;
    let path: PathBuf = ctx.require("pvalues", a.pvalues.clone())?;
    let p = read_pvalues(&path)?;
    let res = bh_procedure(&p, q)?;
    let mut t = Table::new(["index", "p", "rejected"]);
    let mut flags = vec![false; p.len()];
    for &i in &res.rejected {
        flags[i] = true;
    }
    for (i, (&pv, &f)) in p.iter().zip(&flags).enumerate() {
        t.push(vec![i.into(), pv.into(), f.into()]);
    }
    Ok(Report::json(&res)?.with_table(t))
}

pub fn fcr(ctx: &mut Ctx, a: &FcrArgs) -> Result<Report, CliError> {
    let q = ctx.get("q", a.q, 0.05)?;
    let m: usize = ctx.require("m", a.m)?;
    let path: PathBuf = ctx.require("input", a.input.clone())?;
    let mut rdr = reader(&path)?;
    let headers = rdr.headers()?.clone();
    let pos = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(iy), Some(is)) = (pos("y"), pos("sigma")) else {
        return Err(Error::Parse { line: 1, message: "header needs columns y and sigma".into() }.into());
    };
    let (ii, it) = (pos("index"), pos("theta"));
    let mut selected = Vec::new();
    let mut truth = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize, name: &str| number(rec.get(i).unwrap_or(""), line, name);
        let index = match ii {
            Some(i) => rec
                .get(i)
                .unwrap_or("")
                .parse::<usize>()
                .map_err(|_| Error::Parse { line, message: "column 'index' must be a non-negative integer".into() })?,
            None => row,
        };
        selected.push((index, get(iy, "y")?, get(is, "sigma")?));
        if let Some(i) = it {
            truth.push((index, get(i, "theta")?));
        }
    }
    let intervals = fcr_adjusted_cis(&selected, q, m)?;
    let ledger = if it.is_some() {
        let misses = intervals.iter().zip(&truth).filter(|(iv, t)| !iv.interval.contains(t.1)).count();
        Some(CoverageLedger::new(intervals.len(), misses)?)
    } else {
        None
    };
    let mut cols = vec!["index", "y", "sigma", "lo", "hi", "level"];
    if ledger.is_some() {
        cols.extend(["theta", "covered"]);
    }
    let mut t = Table::new(cols);
    for (k, iv) in intervals.iter().enumerate() {
        let (_, y, s) = selected[k];
        let mut row = vec![iv.index.into(), y.into(), s.into(), iv.interval.lo.into(), iv.interval.hi.into(), iv.level.into()];
        if ledger.is_some() {
            let th = truth[k].1;
            row.push(th.into());
            row.push(iv.interval.contains(th).into());
        }
        t.push(row);
    }
    let res = json!({ "q": q, "m": m, "R": intervals.len(), "intervals": intervals, "ledger": ledger });
    Ok(Report::json(&res)?.with_table(t))
}
