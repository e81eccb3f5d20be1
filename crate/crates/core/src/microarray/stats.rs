use serde::Serialize;

use super::fit::EbayesFit;
use super::records::GeneRecord;
use crate::error::{Error, Result};
use crate::model::{Direction, SelectionRule, Statistic};
use crate::numerics::special::{t_isf, t_sf};

/// A t statistic with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TStatistic {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// `t̃ = ȳ / (s̃/√n)` with `p̃ = 2 Pr(T_{ν₀+df} > |t̃|)`.
pub fn moderated_t(rec: &GeneRecord, fit: &EbayesFit) -> TStatistic {
    let st2 = fit.moderated_variance(rec.s2, rec.df);
    let t = rec.ybar / (st2 / rec.n as f64).sqrt();
    let df = fit.nu0 + rec.df;
    TStatistic { t, p: two_sided_p(t, df), df }
}

/// The ordinary t statistic `ȳ / (s/√n)` on `df` degrees of freedom.
pub fn ordinary_t(rec: &GeneRecord) -> Result<TStatistic> {
    if !(rec.s2 > 0.0) {
        return Err(Error::Domain(format!("gene {} has zero sample variance", rec.id)));
    }
    let t = rec.ybar / (rec.s2 / rec.n as f64).sqrt();
    Ok(TStatistic { t, p: two_sided_p(t, rec.df), df: rec.df })
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    (2.0 * t_sf(t.abs(), df).unwrap_or(0.0)).min(1.0)
}

/// `|t̃| ≥ a` (or a one-sided version) for the fitted variance prior.
pub fn moderated_t_rule(fit: &EbayesFit, a: f64, direction: Direction) -> SelectionRule {
    SelectionRule::StatThreshold { stat: Statistic::ModeratedT { nu0: fit.nu0, s0sq: fit.s0sq }, s: a, direction }
}

/// Smallest `|t|` that BH at level `q` can reject among `m` two-sided tests
/// on `df` degrees of freedom: the quantile at `1 − q/(2m)`.
pub fn bh_rejection_bound(m: usize, q: f64, df: f64) -> Result<f64> {
    if m == 0 || !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("need m > 0 and q in (0, 1), got m = {m}, q = {q}")));
    }
    t_isf(q / (2.0 * m as f64), df)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gene_6239_statistic() {
        let t = moderated_t(&GeneRecord::new("6239", -0.435, 0.0173), &EbayesFit::swirl());
        assert!((t.t + 4.51).abs() < 0.01, "{}", t.t);
        assert!((t.df - 7.02).abs() < 1e-12);
    }

    #[test]
    fn zero_mean_has_unit_p_value() {
        let t = moderated_t(&GeneRecord::new("z", 0.0, 0.03), &EbayesFit::swirl());
        assert_eq!(t.t, 0.0);
        assert!((t.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn many_residual_df_give_the_ordinary_t() {
        let rec = GeneRecord { df: 1e6, ..GeneRecord::new("g", 0.3, 0.052) };
        let m = moderated_t(&rec, &EbayesFit::swirl());
        let o = ordinary_t(&rec).unwrap();
        assert!((m.t - o.t).abs() < 1e-5 * o.t.abs());
    }

    #[test]
    fn raw_t_bh_bound() {
        let b = bh_rejection_bound(8448, 0.1, 3.0).unwrap();
        assert!((b - 57.10).abs() < 0.05, "{b}");
    }
}
