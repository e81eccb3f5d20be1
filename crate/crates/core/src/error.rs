use thiserror::Error;

/// Which side of the parameter axis failed to decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Lower,
    Upper,
}

impl std::fmt::Display for Tail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tail::Lower => f.write_str("lower"),
            Tail::Upper => f.write_str("upper"),
        }
    }
}

#[derive(Error, Debug)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite integrand value {value} at node {at}")]
    NonFinite { at: f64, value: f64 },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("no sign change on [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    Bracketing { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("improper posterior: {tail} tail does not decay ({detail})")]
    ImproperPosterior { tail: Tail, detail: String },
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("calibration failed: target {target} outside achieved risk range [{min_risk}, {max_risk}]")]
    Calibration { target: f64, min_risk: f64, max_risk: f64 },
    #[error("degenerate selection rule: {0}")]
    DegenerateRule(String),
    #[error("infeasible truncation: estimated acceptance rate {rate:e}")]
    InfeasibleTruncation { rate: f64 },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("variance prior fit failed: {0}")]
    FitFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NonFinite { .. } => "non_finite",
            Error::Numeric(_) => "numeric",
            Error::Bracketing { .. } => "bracketing",
            Error::Precondition(_) => "precondition",
            Error::ImproperPosterior { .. } => "improper_posterior",
            Error::Unsupported(_) => "unsupported_combination",
            Error::Config(_) => "configuration",
            Error::Calibration { .. } => "calibration",
            Error::DegenerateRule(_) => "degenerate_rule",
            Error::InfeasibleTruncation { .. } => "infeasible_truncation",
            Error::Parse { .. } => "parse",
            Error::FitFailure(_) => "fit_failure",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
