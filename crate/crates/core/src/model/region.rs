use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numerics::special::{log_add_exp, normal_log_interval};

mod bound {
    use super::*;

    pub fn serialize_lo<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() { s.serialize_some(v) } else { s.serialize_none() }
    }

    pub fn serialize_hi<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        serialize_lo(v, s)
    }

    pub fn deserialize_lo<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }

    pub fn deserialize_hi<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }

    pub fn neg_inf() -> f64 {
        f64::NEG_INFINITY
    }

    pub fn pos_inf() -> f64 {
        f64::INFINITY
    }
}

/// Closed interval `[lo, hi]`; infinite ends serialize as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(
        serialize_with = "bound::serialize_lo",
        deserialize_with = "bound::deserialize_lo",
        default = "bound::neg_inf"
    )]
    pub lo: f64,
    #[serde(
        serialize_with = "bound::serialize_hi",
        deserialize_with = "bound::deserialize_hi",
        default = "bound::pos_inf"
    )]
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// A finite union of disjoint closed intervals on the real line, kept sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub intervals: Vec<Interval>,
}

impl Region {
    pub fn new(mut intervals: Vec<Interval>) -> Self {
        intervals.retain(|i| i.lo <= i.hi && !i.lo.is_nan() && !i.hi.is_nan());
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Region { intervals: merged }
    }

    pub fn whole() -> Self {
        Region { intervals: vec![Interval::new(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn empty() -> Self {
        Region { intervals: Vec::new() }
    }

    /// `|x| ≥ a`.
    pub fn two_sided(a: f64) -> Self {
        if a <= 0.0 {
            return Self::whole();
        }
        Region::new(vec![Interval::new(f64::NEG_INFINITY, -a), Interval::new(a, f64::INFINITY)])
    }

    /// `x ≥ a`.
    pub fn at_least(a: f64) -> Self {
        Region::new(vec![Interval::new(a, f64::INFINITY)])
    }

    /// `x ≤ a`.
    pub fn at_most(a: f64) -> Self {
        Region::new(vec![Interval::new(f64::NEG_INFINITY, a)])
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_whole(&self) -> bool {
        self.intervals.len() == 1 && self.intervals[0].lo == f64::NEG_INFINITY && self.intervals[0].hi == f64::INFINITY
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    /// Finite interval endpoints, useful as quadrature breakpoints.
    pub fn edges(&self) -> Vec<f64> {
        self.intervals
            .iter()
            .flat_map(|i| [i.lo, i.hi])
            .filter(|x| x.is_finite())
            .collect()
    }

    pub fn complement(&self) -> Region {
        let mut out = Vec::new();
        let mut cursor = f64::NEG_INFINITY;
        for iv in &self.intervals {
            if iv.lo > cursor {
                out.push(Interval::new(cursor, iv.lo));
            }
            cursor = iv.hi;
        }
        if cursor < f64::INFINITY {
            out.push(Interval::new(cursor, f64::INFINITY));
        }
        Region::new(out)
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let mut out = Vec::new();
        for a in &self.intervals {
            for b in &other.intervals {
                let lo = a.lo.max(b.lo);
                let hi = a.hi.min(b.hi);
                if lo <= hi {
                    out.push(Interval::new(lo, hi));
                }
            }
        }
        Region::new(out)
    }

    /// Lebesgue-measure clipping to `[lo, hi]`.
    pub fn clip(&self, lo: f64, hi: f64) -> Region {
        self.intersect(&Region::new(vec![Interval::new(lo, hi)]))
    }

    /// `log Pr(X ∈ region)` for `X ~ N(mean, sd²)`.
    pub fn normal_log_prob(&self, mean: f64, sd: f64) -> f64 {
        self.intervals
            .iter()
            .map(|i| normal_log_interval((i.lo - mean) / sd, (i.hi - mean) / sd))
            .fold(f64::NEG_INFINITY, log_add_exp)
    }

    pub fn normal_prob(&self, mean: f64, sd: f64) -> f64 {
        self.normal_log_prob(mean, sd).exp().min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::normal_sf;

    #[test]
    fn union_is_normalized() {
        let r = Region::new(vec![Interval::new(3.0, 5.0), Interval::new(-1.0, 1.0), Interval::new(0.5, 2.0)]);
        assert_eq!(r.intervals, vec![Interval::new(-1.0, 2.0), Interval::new(3.0, 5.0)]);
        assert!(r.contains(4.0) && !r.contains(2.5));
    }

    #[test]
    fn complement_and_intersection() {
        let r = Region::two_sided(3.111);
        let c = r.complement();
        assert_eq!(c.intervals, vec![Interval::new(-3.111, 3.111)]);
        assert_eq!(c.complement(), r);
        assert!(r.intersect(&c).intervals.iter().all(|i| i.lo == i.hi));
        assert!(Region::whole().complement().is_empty());
    }

    #[test]
    fn normal_probability() {
        let r = Region::two_sided(3.111);
        assert!((r.normal_prob(0.0, 1.0) - 2.0 * normal_sf(3.111)).abs() < 1e-16);
        assert!((r.normal_prob(20.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((Region::whole().normal_prob(1.0, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_uses_null_for_infinite_ends() {
        let r = Region::two_sided(2.0);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"intervals":[{"lo":null,"hi":-2.0},{"lo":2.0,"hi":null}]}"#);
        let back: Region = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        let open: Interval = serde_json::from_str(r#"{"lo":1.0}"#).unwrap();
        assert_eq!(open.hi, f64::INFINITY);
    }
}
