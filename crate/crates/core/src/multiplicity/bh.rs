use serde::Serialize;

use crate::error::{Error, Result};

/// Outcome of a multiple-testing procedure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestingResult {
    pub m: usize,
    /// Indices of the rejected hypotheses, ascending.
    pub rejected: Vec<usize>,
    pub r: usize,
    /// Largest rejected p-value (zero when nothing is rejected).
    pub threshold_p: f64,
    pub q: f64,
}

fn check_pvalues(p: &[f64]) -> Result<()> {
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("p-value {i} is {v}, outside [0, 1]")));
    }
    Ok(())
}

/// Benjamini–Hochberg step-up procedure at level `q`: reject the `k`
/// smallest p-values with `k = max{i : p_(i) ≤ q i / m}`. Ties at the cutoff
/// are rejected together.
pub fn bh_procedure(pvalues: &[f64], q: f64) -> Result<TestingResult> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1], got {q}")));
    }
    check_pvalues(pvalues)?;
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let mut k = 0;
    for (rank, &i) in order.iter().enumerate().rev() {
        if pvalues[i] <= q * (rank + 1) as f64 / m as f64 {
            k = rank + 1;
            break;
        }
    }
    let threshold_p = if k == 0 { 0.0 } else { pvalues[order[k - 1]] };
    let mut rejected: Vec<usize> = if k == 0 {
        Vec::new()
    } else {
        (0..m).filter(|&i| pvalues[i] <= threshold_p).collect()
    };
    rejected.sort_unstable();
    Ok(TestingResult { m, r: rejected.len(), rejected, threshold_p, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Largest `k` whose `k`-th smallest p-value passes, found by trying all `k`.
    fn brute_force(p: &[f64], q: f64) -> usize {
        let m = p.len();
        let mut sorted = p.to_vec();
        sorted.sort_by(f64::total_cmp);
        (1..=m).filter(|&k| sorted[k - 1] <= q * k as f64 / m as f64).max().unwrap_or(0)
    }

    #[test]
    fn small_example() {
        let r = bh_procedure(&[0.01, 0.02, 0.5, 0.6, 0.9], 0.1).unwrap();
        assert_eq!(r.rejected, vec![0, 1]);
        assert_eq!(r.threshold_p, 0.02);
    }

    #[test]
    fn nothing_to_reject() {
        let r = bh_procedure(&[1.0; 7], 0.2).unwrap();
        assert_eq!(r.r, 0);
        assert!(bh_procedure(&[], 0.1).unwrap().rejected.is_empty());
    }

    #[test]
    fn invalid_inputs() {
        assert!(bh_procedure(&[0.1, 1.2], 0.1).is_err());
        assert!(bh_procedure(&[0.1, f64::NAN], 0.1).is_err());
        assert!(bh_procedure(&[0.1], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(p in prop::collection::vec(0.0f64..=1.0, 1..=12), q in 0.01f64..1.0) {
            let r = bh_procedure(&p, q).unwrap();
            let k = brute_force(&p, q);
            prop_assert_eq!(r.r, k);
            let m = p.len() as f64;
            prop_assert!(r.threshold_p <= q * r.r as f64 / m + 1e-15);
            for &i in &r.rejected {
                prop_assert!(p[i] <= r.threshold_p);
            }
        }

        #[test]
        fn monotone_in_level(p in prop::collection::vec(0.0f64..=1.0, 1..=40), q in 0.01f64..0.5, dq in 0.0f64..0.5) {
            let a = bh_procedure(&p, q).unwrap();
            let b = bh_procedure(&p, q + dq).unwrap();
            prop_assert!(a.rejected.iter().all(|i| b.rejected.contains(i)));
        }

        #[test]
        fn coarse_ties_are_rejected_together(p in prop::collection::vec(prop::sample::select(vec![0.001, 0.01, 0.05, 0.2, 1.0]), 1..=12)) {
            let r = bh_procedure(&p, 0.1).unwrap();
            prop_assert_eq!(r.r, brute_force(&p, 0.1));
        }
    }
}
