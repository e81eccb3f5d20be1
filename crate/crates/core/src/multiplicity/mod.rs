//! Benjamini–Hochberg testing, FCR-adjusted intervals and directional calls.

pub mod bh;
pub mod coverage;

pub use bh::{bh_procedure, TestingResult};
pub use coverage::{
    directional_calls, fcr_adjusted_cis, marginal_cis, CoverageLedger, DirectionalCalls, Selected, SelectedInterval,
};
