use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_REPLICATES: u32 = 4;
pub const DEFAULT_DF: f64 = 3.0;

/// Summary statistics of one gene: mean log ratio and sample variance over
/// `n` replicate arrays with `df` residual degrees of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneRecord {
    pub id: String,
    pub ybar: f64,
    pub s2: f64,
    pub n: u32,
    pub df: f64,
}

impl GeneRecord {
    pub fn new(id: impl Into<String>, ybar: f64, s2: f64) -> Self {
        GeneRecord { id: id.into(), ybar, s2, n: DEFAULT_REPLICATES, df: DEFAULT_DF }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.ybar.is_finite() {
            return Err(Error::Domain(format!("gene {}: mean {} is not finite", self.id, self.ybar)));
        }
        if !(self.s2.is_finite() && self.s2 >= 0.0) {
            return Err(Error::Domain(format!("gene {}: variance {} must be finite and non-negative", self.id, self.s2)));
        }
        if self.n < 2 || !(self.df.is_finite() && self.df >= 1.0) {
            return Err(Error::Domain(format!("gene {}: need n >= 2 and df >= 1, got n = {}, df = {}", self.id, self.n, self.df)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    pub line: u64,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ingested {
    pub records: Vec<GeneRecord>,
    /// Well-formed rows that violate a record invariant.
    pub rejected: Vec<RejectedRow>,
}

#[derive(Deserialize)]
struct Row {
    id: String,
    ybar: f64,
    s2: f64,
    n: Option<u32>,
    df: Option<f64>,
}

/// Read gene summaries from CSV with header `id,ybar,s2[,n,df]`.
pub fn ingest(path: &Path) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file)
}

/// As [`ingest`], from any reader. A row that does not parse aborts with its
/// line number; a row with invalid values is listed in `rejected`.
pub fn ingest_reader<R: Read>(reader: R) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for need in ["id", "ybar", "s2"] {
        if !headers.iter().any(|h| h == need) {
            return Err(Error::Parse { line: 1, message: format!("missing column '{need}'") });
        }
    }
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse { line, message: e.to_string() }
        })?;
        let rec = GeneRecord {
            id: row.id,
            ybar: row.ybar,
            s2: row.s2,
            n: row.n.unwrap_or(DEFAULT_REPLICATES),
            df: row.df.unwrap_or(DEFAULT_DF),
        };
        let line = records.len() as u64 + rejected.len() as u64 + 2;
        match rec.validate() {
            Ok(()) => records.push(rec),
            Err(e) => rejected.push(RejectedRow { line, id: rec.id, reason: e.to_string() }),
        }
    }
    Ok(Ingested { records, rejected })
}
