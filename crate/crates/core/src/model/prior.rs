use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::{chi2_sf, ln_gamma, log_add_exp, normal_cdf, normal_log_pdf};

/// Number of scale units past which a component's tail is ignored in
/// quadrature. `exp(-46)` is about `1e-20`.
pub const LAPLACE_TAIL_UNITS: f64 = 46.0;
pub const NORMAL_TAIL_SDS: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub prior: Prior,
}

/// Density specification for a scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    Normal { mean: f64, var: f64 },
    /// Double exponential centred at zero: `rate·exp(-rate·|θ|)/2`.
    Laplace { rate: f64 },
    Mixture { components: Vec<Component> },
    /// Law of `nu0·s0sq / χ²(nu0)`, a prior for a variance.
    ScaledInvChiSq { nu0: f64, s0sq: f64 },
    /// Improper uniform density, identically one.
    Flat,
    /// Atom of mass `pi0` at zero plus `(1 − pi0)·alt`.
    TwoGroup { pi0: f64, alt: Box<Prior> },
    PointMass { at: f64 },
}

impl Prior {
    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        let p = Prior::Normal { mean, var };
        p.validate()?;
        Ok(p)
    }

    pub fn laplace(rate: f64) -> Result<Self> {
        let p = Prior::Laplace { rate };
        p.validate()?;
        Ok(p)
    }

    pub fn mixture(components: Vec<(f64, Prior)>) -> Result<Self> {
        let p = Prior::Mixture {
            components: components
                .into_iter()
                .map(|(weight, prior)| Component { weight, prior })
                .collect(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn two_group(pi0: f64, alt: Prior) -> Result<Self> {
        let p = Prior::TwoGroup { pi0, alt: Box::new(alt) };
        p.validate()?;
        Ok(p)
    }

    pub fn scaled_inv_chi_sq(nu0: f64, s0sq: f64) -> Result<Self> {
        let p = Prior::ScaledInvChiSq { nu0, s0sq };
        p.validate()?;
        Ok(p)
    }

    /// The simulation prior of the running example: rate 10 with weight 0.9
    /// and rate 1 with weight 0.1.
    pub fn example_mixture() -> Self {
        Prior::Mixture {
            components: vec![
                Component { weight: 0.9, prior: Prior::Laplace { rate: 10.0 } },
                Component { weight: 0.1, prior: Prior::Laplace { rate: 1.0 } },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and positive, got {v}")))
            }
        };
        match self {
            Prior::Normal { mean, var } => {
                if !mean.is_finite() {
                    return Err(Error::Config(format!("normal mean must be finite, got {mean}")));
                }
                positive("normal var", *var)
            }
            Prior::Laplace { rate } => positive("laplace rate", *rate),
            Prior::ScaledInvChiSq { nu0, s0sq } => {
                positive("nu0", *nu0)?;
                positive("s0sq", *s0sq)
            }
            Prior::Flat => Ok(()),
            Prior::PointMass { at } => {
                if at.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("point mass location must be finite, got {at}")))
                }
            }
            Prior::TwoGroup { pi0, alt } => {
                if !(0.0..=1.0).contains(pi0) {
                    return Err(Error::Config(format!("pi0 must lie in [0, 1], got {pi0}")));
                }
                if !alt.is_proper() {
                    return Err(Error::Config("two-group alternative must be proper".into()));
                }
                alt.validate()
            }
            Prior::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::Config("mixture needs at least one component".into()));
                }
                let mut total = 0.0;
                for c in components {
                    positive("mixture weight", c.weight)?;
                    if !c.prior.is_proper() {
                        return Err(Error::Config("mixture components must be proper".into()));
                    }
                    c.prior.validate()?;
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
                }
                Ok(())
            }
        }
    }

    pub fn is_proper(&self) -> bool {
        !matches!(self, Prior::Flat)
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Prior::Flat)
    }

    /// Density of the continuous part at `theta`. Atoms contribute nothing
    /// here; see [`Prior::atoms`].
    pub fn density(&self, theta: f64) -> f64 {
        match self {
            Prior::Flat => 1.0,
            Prior::PointMass { .. } => 0.0,
            Prior::Mixture { components } => components.iter().map(|c| c.weight * c.prior.density(theta)).sum(),
            Prior::TwoGroup { pi0, alt } => (1.0 - pi0) * alt.density(theta),
            _ => self.log_density(theta).exp(),
        }
    }

    pub fn log_density(&self, theta: f64) -> f64 {
        match self {
            Prior::Normal { mean, var } => {
                let sd = var.sqrt();
                normal_log_pdf((theta - mean) / sd) - sd.ln()
            }
            Prior::Laplace { rate } => (0.5 * rate).ln() - rate * theta.abs(),
            Prior::ScaledInvChiSq { nu0, s0sq } => {
                if theta <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let h = 0.5 * nu0;
                h * (h * s0sq).ln() - ln_gamma(h) - (h + 1.0) * theta.ln() - h * s0sq / theta
            }
            Prior::Flat => 0.0,
            Prior::PointMass { .. } => f64::NEG_INFINITY,
            Prior::Mixture { components } => components
                .iter()
                .map(|c| c.weight.ln() + c.prior.log_density(theta))
                .fold(f64::NEG_INFINITY, log_add_exp),
            Prior::TwoGroup { pi0, alt } => (1.0 - pi0).ln() + alt.log_density(theta),
        }
    }

    /// Point masses as `(location, mass)` pairs, merged by location.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        self.collect_atoms(1.0, &mut out);
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(out.len());
        for (x, m) in out {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += m,
                _ => merged.push((x, m)),
            }
        }
        merged.retain(|a| a.1 > 0.0);
        merged
    }

    fn collect_atoms(&self, scale: f64, out: &mut Vec<(f64, f64)>) {
        match self {
            Prior::PointMass { at } => out.push((*at, scale)),
            Prior::Mixture { components } => {
                for c in components {
                    c.prior.collect_atoms(scale * c.weight, out);
                }
            }
            Prior::TwoGroup { pi0, alt } => {
                out.push((0.0, scale * pi0));
                alt.collect_atoms(scale * (1.0 - pi0), out);
            }
            _ => {}
        }
    }

    /// Mass of the continuous part (one minus the atom masses).
    pub fn continuous_mass(&self) -> f64 {
        match self {
            Prior::PointMass { .. } => 0.0,
            Prior::Mixture { components } => components.iter().map(|c| c.weight * c.prior.continuous_mass()).sum(),
            Prior::TwoGroup { pi0, alt } => (1.0 - pi0) * alt.continuous_mass(),
            _ => 1.0,
        }
    }

    /// Points where the density is continuous but not differentiable.
    pub fn cusps(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_cusps(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_cusps(&self, out: &mut Vec<f64>) {
        match self {
            Prior::Laplace { .. } => out.push(0.0),
            Prior::Mixture { components } => components.iter().for_each(|c| c.prior.collect_cusps(out)),
            Prior::TwoGroup { alt, .. } => alt.collect_cusps(out),
            _ => {}
        }
    }

    /// Quadrature breakpoints covering the continuous part of a proper
    /// location prior: the ends of each component's effective support, the
    /// component centres and the cusps. Empty for priors without a finite
    /// effective support.
    pub fn support_breaks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breaks(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breaks(&self, out: &mut Vec<f64>) {
        match self {
            Prior::Normal { mean, var } => {
                let w = NORMAL_TAIL_SDS * var.sqrt();
                out.extend([mean - w, *mean, mean + w]);
            }
            Prior::Laplace { rate } => {
                let w = LAPLACE_TAIL_UNITS / rate;
                out.extend([-w, 0.0, w]);
            }
            Prior::Mixture { components } => components.iter().for_each(|c| c.prior.collect_breaks(out)),
            Prior::TwoGroup { alt, .. } => alt.collect_breaks(out),
            _ => {}
        }
    }

    /// Cumulative distribution function, atoms included (right-continuous).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match self {
            Prior::Normal { mean, var } => normal_cdf((x - mean) / var.sqrt()),
            Prior::Laplace { rate } => {
                if x < 0.0 {
                    0.5 * (rate * x).exp()
                } else {
                    1.0 - 0.5 * (-rate * x).exp()
                }
            }
            Prior::ScaledInvChiSq { nu0, s0sq } => {
                if x <= 0.0 {
                    0.0
                } else {
                    chi2_sf(nu0 * s0sq / x, *nu0)
                }
            }
            Prior::Flat => return Err(Error::Config("a flat prior has no distribution function".into())),
            Prior::PointMass { at } => {
                if x >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            Prior::Mixture { components } => {
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight * c.prior.cdf(x)?;
                }
                acc
            }
            Prior::TwoGroup { pi0, alt } => pi0 * if x >= 0.0 { 1.0 } else { 0.0 } + (1.0 - pi0) * alt.cdf(x)?,
        })
    }

    /// Probability of the interval `(lo, hi]`.
    pub fn interval_prob(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        // Upper tails lose precision when taken as 1 − cdf; use symmetry for
        // zero-centred families.
        let upper = |x: f64| -> Result<f64> {
            match self {
                Prior::Normal { mean, var } => Ok(normal_cdf(-(x - mean) / var.sqrt())),
                Prior::Laplace { rate } if x >= 0.0 => Ok(0.5 * (-rate * x).exp()),
                _ => Ok(1.0 - self.cdf(x)?),
            }
        };
        let lo_cdf = if lo == f64::NEG_INFINITY { 0.0 } else { self.cdf(lo)? };
        let hi_cdf = if hi == f64::INFINITY { 1.0 } else { self.cdf(hi)? };
        if lo > 0.0 && lo.is_finite() {
            let hi_upper = if hi == f64::INFINITY { 0.0 } else { upper(hi)? };
            return Ok((upper(lo)? - hi_upper).max(0.0));
        }
        Ok((hi_cdf - lo_cdf).max(0.0))
    }

    /// Mean of a proper location prior with finite first moment.
    pub fn mean(&self) -> Result<f64> {
        Ok(match self {
            Prior::Normal { mean, .. } => *mean,
            Prior::Laplace { .. } => 0.0,
            Prior::PointMass { at } => *at,
            Prior::Mixture { components } => {
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight * c.prior.mean()?;
                }
                acc
            }
            Prior::TwoGroup { pi0, alt } => (1.0 - pi0) * alt.mean()?,
            Prior::ScaledInvChiSq { nu0, s0sq } => {
                if *nu0 <= 2.0 {
                    return Err(Error::Domain("scaled inverse chi-square mean needs nu0 > 2".into()));
                }
                nu0 * s0sq / (nu0 - 2.0)
            }
            Prior::Flat => return Err(Error::Config("a flat prior has no mean".into())),
        })
    }

    pub fn variance(&self) -> Result<f64> {
        let second = self.second_moment()?;
        let m = self.mean()?;
        Ok((second - m * m).max(0.0))
    }

    fn second_moment(&self) -> Result<f64> {
        Ok(match self {
            Prior::Normal { mean, var } => var + mean * mean,
            Prior::Laplace { rate } => 2.0 / (rate * rate),
            Prior::PointMass { at } => at * at,
            Prior::Mixture { components } => {
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight * c.prior.second_moment()?;
                }
                acc
            }
            Prior::TwoGroup { pi0, alt } => (1.0 - pi0) * alt.second_moment()?,
            Prior::ScaledInvChiSq { nu0, s0sq } => {
                if *nu0 <= 4.0 {
                    return Err(Error::Domain("scaled inverse chi-square variance needs nu0 > 4".into()));
                }
                let m = nu0 * s0sq / (nu0 - 2.0);
                m * m + 2.0 * m * m / (nu0 - 4.0)
            }
            Prior::Flat => return Err(Error::Config("a flat prior has no moments".into())),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self {
            Prior::Normal { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            }
            Prior::Laplace { rate } => {
                let e: f64 = rng.sample(Exp1);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e / rate
            }
            Prior::ScaledInvChiSq { nu0, s0sq } => {
                let chi = ChiSquared::new(*nu0).map_err(|e| Error::Config(e.to_string()))?;
                nu0 * s0sq / chi.sample(rng)
            }
            Prior::Flat => return Err(Error::Config("cannot sample from a flat prior".into())),
            Prior::PointMass { at } => *at,
            Prior::Mixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let last = components.len() - 1;
                for (i, c) in components.iter().enumerate() {
                    acc += c.weight;
                    if u < acc || i == last {
                        return c.prior.sample(rng);
                    }
                }
                unreachable!()
            }
            Prior::TwoGroup { pi0, alt } => {
                let u: f64 = rng.random();
                if u < *pi0 {
                    0.0
                } else {
                    alt.sample(rng)?
                }
            }
        })
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => t
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("cannot parse {what} from '{s}'"))),
    }
}

pub(crate) fn parse_number(s: &str, what: &str) -> Result<f64> {
    parse_f64(s, what)
}

/// Shorthand syntax: `flat`, `example1`, `normal:MEAN,VAR`, `laplace:RATE`,
/// `point:AT`, `sichisq:NU0,S0SQ`, `two_group:PI0,<alt shorthand>`.
impl FromStr for Prior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h.trim().to_ascii_lowercase(), r),
            None => (s.to_ascii_lowercase(), ""),
        };
        let args = || rest.split(',').collect::<Vec<_>>();
        let p = match head.as_str() {
            "flat" => Prior::Flat,
            "example1" | "example_mixture" => Prior::example_mixture(),
            "normal" => {
                let a = args();
                if a.len() != 2 {
                    return Err(Error::Config(format!("normal needs MEAN,VAR: '{s}'")));
                }
                Prior::Normal { mean: parse_f64(a[0], "mean")?, var: parse_f64(a[1], "var")? }
            }
            "laplace" => Prior::Laplace { rate: parse_f64(rest, "rate")? },
            "point" | "point_mass" => Prior::PointMass { at: parse_f64(rest, "location")? },
            "sichisq" | "scaled_inv_chi_sq" => {
                let a = args();
                if a.len() != 2 {
                    return Err(Error::Config(format!("sichisq needs NU0,S0SQ: '{s}'")));
                }
                Prior::ScaledInvChiSq { nu0: parse_f64(a[0], "nu0")?, s0sq: parse_f64(a[1], "s0sq")? }
            }
            "two_group" | "twogroup" => {
                let (pi0, alt) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("two_group needs PI0,ALT: '{s}'")))?;
                Prior::TwoGroup { pi0: parse_f64(pi0, "pi0")?, alt: Box::new(alt.parse()?) }
            }
            _ => return Err(Error::Config(format!("unknown prior '{s}'"))),
        };
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Normal { mean, var } => write!(f, "normal:{mean},{var}"),
            Prior::Laplace { rate } => write!(f, "laplace:{rate}"),
            Prior::ScaledInvChiSq { nu0, s0sq } => write!(f, "sichisq:{nu0},{s0sq}"),
            Prior::Flat => write!(f, "flat"),
            Prior::PointMass { at } => write!(f, "point:{at}"),
            Prior::TwoGroup { pi0, alt } => write!(f, "two_group:{pi0},{alt}"),
            Prior::Mixture { components } => {
                write!(f, "mixture(")?;
                for (i, c) in components.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{}*{}", c.weight, c.prior)?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::{integrate, Grid, Scheme};
    use crate::numerics::RngStream;
    use proptest::prelude::*;

    #[test]
    fn reference_densities() {
        assert!((Prior::example_mixture().density(0.0) - 4.55).abs() < 1e-12);
        assert!((Prior::laplace(8.5).unwrap().density(0.0) - 4.25).abs() < 1e-12);
        assert!((Prior::normal(0.0, 1.0).unwrap().density(0.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert_eq!(Prior::Flat.density(123.0), 1.0);
    }

    #[test]
    fn validation() {
        assert!(Prior::laplace(0.0).is_err());
        assert!(Prior::normal(0.0, -1.0).is_err());
        assert!(Prior::mixture(vec![(0.5, Prior::Flat), (0.5, Prior::Laplace { rate: 1.0 })]).is_err());
        assert!(Prior::mixture(vec![(0.6, Prior::Laplace { rate: 1.0 }), (0.6, Prior::Laplace { rate: 2.0 })]).is_err());
        assert!(Prior::two_group(1.2, Prior::Laplace { rate: 1.0 }).is_err());
        assert!(Prior::scaled_inv_chi_sq(4.02, 0.052).is_ok());
    }

    #[test]
    fn densities_integrate_to_continuous_mass() {
        let priors = [
            Prior::example_mixture(),
            Prior::normal(1.0, 0.3).unwrap(),
            Prior::two_group(0.9, Prior::normal(2.0, 1.0).unwrap()).unwrap(),
        ];
        for p in priors {
            let g = Grid::with_breaks(-60.0, 60.0, &p.support_breaks(), 40_001, Scheme::Simpson).unwrap();
            let mass = integrate(|t| p.density(t), &g).unwrap();
            assert!((mass - p.continuous_mass()).abs() < 1e-8, "{p}: {mass}");
        }
    }

    #[test]
    fn inverse_chi_square_density_and_cdf() {
        let p = Prior::scaled_inv_chi_sq(4.02, 0.052).unwrap();
        let g = Grid::simpson(1e-6, 200.0, 400_001).unwrap();
        let mass = integrate(|t| p.density(t), &g).unwrap();
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        let g2 = Grid::simpson(1e-6, 0.05, 20_001).unwrap();
        let part = integrate(|t| p.density(t), &g2).unwrap();
        assert!((part - p.cdf(0.05).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn atoms_are_merged() {
        let p = Prior::mixture(vec![
            (0.5, Prior::PointMass { at: 0.0 }),
            (0.5, Prior::two_group(0.4, Prior::Laplace { rate: 2.0 }).unwrap()),
        ])
        .unwrap();
        assert_eq!(p.atoms(), vec![(0.0, 0.7)]);
        assert!((p.continuous_mass() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn shorthand_round_trip() {
        for s in ["flat", "laplace:8.5", "normal:0,1", "point:2", "two_group:0.9,normal:2,1", "sichisq:4.02,0.052"] {
            let p: Prior = s.parse().unwrap();
            let again: Prior = p.to_string().parse().unwrap();
            assert_eq!(p, again);
        }
        assert_eq!("example1".parse::<Prior>().unwrap(), Prior::example_mixture());
        assert!("gamma:1".parse::<Prior>().is_err());
    }

    #[test]
    fn json_schema() {
        let p = Prior::example_mixture();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"mixture":{"components":[{"weight":0.9,"prior":{"laplace":{"rate":10.0}}},{"weight":0.1,"prior":{"laplace":{"rate":1.0}}}]}}"#
        );
        let q: Prior = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert_eq!(serde_json::from_str::<Prior>("\"flat\"").unwrap(), Prior::Flat);
    }

    #[test]
    fn sample_moments_match() {
        let p = Prior::example_mixture();
        let mut rng = RngStream::new(11, 0);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| p.sample(&mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| x * x).sum::<f64>() / n as f64 - mean * mean;
        let expected = p.variance().unwrap();
        assert!((expected - 0.218).abs() < 1e-12);
        assert!(mean.abs() < 4.0 * (expected / n as f64).sqrt());
        assert!((var - expected).abs() < 0.01, "{var}");
    }

    proptest! {
        #[test]
        fn mixture_density_is_linear(theta in -5.0f64..5.0, w in 0.01f64..0.99) {
            let a = Prior::Laplace { rate: 3.0 };
            let b = Prior::Normal { mean: 1.0, var: 2.0 };
            let m = Prior::mixture(vec![(w, a.clone()), (1.0 - w, b.clone())]).unwrap();
            let direct = w * a.density(theta) + (1.0 - w) * b.density(theta);
            prop_assert!((m.density(theta) - direct).abs() <= 1e-14 * direct.max(1e-300));
        }

        #[test]
        fn cdf_is_monotone(x in -10.0f64..10.0, dx in 0.0f64..3.0) {
            let p = Prior::two_group(0.3, Prior::example_mixture()).unwrap();
            prop_assert!(p.cdf(x).unwrap() <= p.cdf(x + dx).unwrap() + 1e-15);
        }
    }
}
