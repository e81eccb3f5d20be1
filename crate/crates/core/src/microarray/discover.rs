use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::EbayesFit;
use super::records::GeneRecord;
use super::selection::passes;
use super::stats::{moderated_t, ordinary_t};
use crate::error::Result;
use crate::model::SelectionRule;
use crate::multiplicity::bh_procedure;

/// How discoveries are declared among the genes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum DiscoveryRule {
    /// Every gene in the region of a selection rule.
    Rule { rule: SelectionRule },
    /// BH on the moderated-t p-values.
    BhModerated { q: f64 },
    /// BH on the ordinary t p-values with the genes' own degrees of freedom.
    BhOrdinary { q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discoveries {
    pub count: usize,
    /// Indices into the record list, ascending.
    pub selected: Vec<usize>,
    /// For BH: the smallest `|t|` among the discoveries.
    pub t_cutoff: Option<f64>,
}

pub fn count_discoveries(records: &[GeneRecord], rule: &DiscoveryRule, fit: &EbayesFit) -> Result<Discoveries> {
    match rule {
        DiscoveryRule::Rule { rule } => {
            let flags: Vec<bool> = records.par_iter().map(|r| passes(rule, r, fit)).collect::<Result<_>>()?;
            let selected: Vec<usize> = flags.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect();
            Ok(Discoveries { count: selected.len(), selected, t_cutoff: None })
        }
        DiscoveryRule::BhModerated { q } => {
            let t: Vec<(f64, f64)> = records.iter().map(|r| moderated_t(r, fit)).map(|s| (s.t, s.p)).collect();
            bh_on(&t, *q)
        }
        DiscoveryRule::BhOrdinary { q } => {
            let t: Vec<(f64, f64)> = records.iter().map(|r| ordinary_t(r).map(|s| (s.t, s.p))).collect::<Result<_>>()?;
            bh_on(&t, *q)
        }
    }
}

fn bh_on(stats: &[(f64, f64)], q: f64) -> Result<Discoveries> {
    let p: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let res = bh_procedure(&p, q)?;
    let t_cutoff = res.rejected.iter().map(|&i| stats[i].0.abs()).reduce(f64::min);
    Ok(Discoveries { count: res.r, selected: res.rejected, t_cutoff })
}
