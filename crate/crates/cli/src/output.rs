use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use sabayes::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Format;
use crate::config::Ctx;

/// The reproducibility header written at the top of every output.
pub fn header(ctx: &Ctx) -> Value {
    json!({
        "tool": "sabayes",
        "version": env!("CARGO_PKG_VERSION"),
        "command": ctx.command,
        "seed": ctx.seed,
        "config": ctx.resolved(),
    })
}

/// A flat table whose cells are written with the shortest representation
/// that parses back to the same value.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Rows as JSON objects keyed by column.
    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| {
                        let v = match v {
                            Cell::Num(x) => json!(x),
                            Cell::Int(x) => json!(x),
                            Cell::Text(s) => json!(s),
                            Cell::Bool(b) => json!(b),
                        };
                        (c.clone(), v)
                    })
                    .collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }

    /// CSV with a commented header carrying `head`.
    pub fn write_csv<W: Write>(&self, head: &Value, extra: &[(String, Value)], out: W) -> Result<(), Error> {
        let mut out = out;
        writeln!(out, "# sabayes {}", head["version"].as_str().unwrap_or(""))?;
        writeln!(out, "# command: {}", head["command"].as_str().unwrap_or(""))?;
        writeln!(out, "# seed: {}", head["seed"])?;
        writeln!(out, "# config: {}", serde_json::to_string(&head["config"])?)?;
        for (k, v) in extra {
            writeln!(out, "# {k}: {}", serde_json::to_string(v)?)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// What a command hands back: a JSON result and, when the data is tabular,
/// the table written in CSV mode.
pub struct Report {
    pub result: Value,
    pub table: Option<Table>,
    /// Values added to the CSV header next to the config.
    pub csv_notes: Vec<(String, Value)>,
    pub default_format: Format,
}

impl Report {
    pub fn json<T: Serialize>(result: &T) -> Result<Self, Error> {
        Ok(Report { result: serde_json::to_value(result)?, table: None, csv_notes: Vec::new(), default_format: Format::Json })
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn csv_by_default(mut self) -> Self {
        self.default_format = Format::Csv;
        self
    }

    pub fn note<T: Serialize>(mut self, key: &str, v: &T) -> Self {
        self.csv_notes.push((key.into(), serde_json::to_value(v).unwrap_or(Value::Null)));
        self
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Error::Io(io::Error::new(e.kind(), format!("cannot create {}: {e}", p.display())))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_table(ctx: &Ctx, table: &Table, notes: &[(String, Value)], path: &Path) -> Result<(), Error> {
    table.write_csv(&header(ctx), notes, sink(Some(path))?)
}

pub fn emit(ctx: &Ctx, report: Report) -> Result<(), Error> {
    let format = ctx.format.unwrap_or(report.default_format);
    if format == Format::Csv && report.table.is_none() {
        return Err(Error::Unsupported(format!("'{}' produces no table; use --format json", ctx.command)));
    }
    let head = header(ctx);
    let mut out = sink(ctx.output.as_deref())?;
    match (format, &report.table) {
        (Format::Csv, Some(t)) => t.write_csv(&head, &report.csv_notes, &mut out)?,
        (Format::Csv, None) => unreachable!("checked above"),
        (Format::Json, _) => {
            let doc = json!({ "header": head, "result": report.result });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}
