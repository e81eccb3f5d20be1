use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::likelihood::Likelihood;
use super::loss::Loss;
use super::prior::parse_number;
use super::region::{Interval, Region};
use crate::error::{Error, Result};
use crate::numerics::special::{ln_gamma, normal_cdf};

/// Statistic a threshold rule is applied to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `y / sigma` under a normal-location likelihood.
    Z,
    /// `ȳ / (s̃ / √n)` with `s̃² = (nu0·s0sq + df·s²)/(nu0 + df)`.
    ModeratedT { nu0: f64, s0sq: f64 },
}

impl Statistic {
    /// Moderated variance `s̃²` for a mean-and-variance observation.
    pub fn moderated_variance(nu0: f64, s0sq: f64, df: f64, s2: f64) -> f64 {
        (nu0 * s0sq + df * s2) / (nu0 + df)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// statistic `≥ s`
    Upper,
    /// statistic `≤ s`
    Lower,
    /// `|statistic| ≥ s`
    TwoSided,
}

/// A measurable region of the observation space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Every observation is selected.
    All,
    /// `|y| ≥ a`.
    TwoSided { a: f64 },
    /// `y ≥ a`.
    OneSided { a: f64 },
    /// Arbitrary union of intervals in `y`.
    Region { region: Region },
    StatThreshold { stat: Statistic, s: f64, direction: Direction },
    /// `{y : ρ̃(y) ≤ s}`, where ρ̃ is the posterior expected loss under a
    /// prior supplied when the rule is resolved.
    LossThreshold { loss: Loss, s: f64 },
}

/// A parameter value: scalar for location models, the pair `(μ, σ²)` for
/// mean-and-variance data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamPoint {
    Scalar(f64),
    MeanVar { mu: f64, sigma2: f64 },
}

impl SelectionRule {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be finite, got {v}")))
            }
        };
        match self {
            SelectionRule::All => Ok(()),
            SelectionRule::TwoSided { a } | SelectionRule::OneSided { a } => finite(*a, "threshold"),
            SelectionRule::Region { region } => {
                if region.is_empty() {
                    Err(Error::DegenerateRule("empty selection region".into()))
                } else {
                    Ok(())
                }
            }
            SelectionRule::StatThreshold { stat, s, .. } => {
                finite(*s, "cutoff")?;
                if let Statistic::ModeratedT { nu0, s0sq } = stat {
                    if !(*nu0 > 0.0 && *s0sq > 0.0) {
                        return Err(Error::Config("moderated t needs positive nu0 and s0sq".into()));
                    }
                }
                Ok(())
            }
            SelectionRule::LossThreshold { s, .. } => finite(*s, "loss cutoff"),
        }
    }

    /// Selection region in the scalar observation space.
    pub fn region(&self, lik: &Likelihood) -> Result<Region> {
        let sigma = lik.sigma()?;
        Ok(match self {
            SelectionRule::All => Region::whole(),
            SelectionRule::TwoSided { a } => Region::two_sided(*a),
            SelectionRule::OneSided { a } => Region::at_least(*a),
            SelectionRule::Region { region } => region.clone(),
            SelectionRule::StatThreshold { stat: Statistic::Z, s, direction } => match direction {
                Direction::Upper => Region::at_least(s * sigma),
                Direction::Lower => Region::at_most(s * sigma),
                Direction::TwoSided => Region::two_sided(s * sigma),
            },
            SelectionRule::StatThreshold { stat: Statistic::ModeratedT { .. }, .. } => {
                return Err(Error::Unsupported(
                    "moderated t thresholds need a mean-and-variance likelihood".into(),
                ))
            }
            SelectionRule::LossThreshold { .. } => {
                return Err(Error::Unsupported(
                    "loss-threshold rules must first be resolved against a prior (see risk::resolve_rule)".into(),
                ))
            }
        })
    }

    pub fn contains(&self, lik: &Likelihood, y: f64) -> Result<bool> {
        Ok(self.region(lik)?.contains(y))
    }

    /// Membership for a mean-and-variance observation `(ȳ, s²)`.
    pub fn contains_mean_var(&self, lik: &Likelihood, ybar: f64, s2: f64) -> Result<bool> {
        let Likelihood::MeanAndVariance { n, df } = lik else {
            return Err(Error::Unsupported("expected a mean-and-variance likelihood".into()));
        };
        match self {
            SelectionRule::All => Ok(true),
            SelectionRule::StatThreshold { stat: Statistic::ModeratedT { nu0, s0sq }, s, direction } => {
                let st = (Statistic::moderated_variance(*nu0, *s0sq, *df, s2) / *n as f64).sqrt();
                let t = ybar / st;
                Ok(match direction {
                    Direction::Upper => t >= *s,
                    Direction::Lower => t <= *s,
                    Direction::TwoSided => t.abs() >= *s,
                })
            }
            _ => Err(Error::Unsupported(
                "only moderated t thresholds apply to mean-and-variance observations".into(),
            )),
        }
    }

    /// `log Pr(y ∈ S | θ)` for scalar observations.
    pub fn log_selection_probability(&self, lik: &Likelihood, theta: f64) -> Result<f64> {
        let sigma = lik.sigma()?;
        Ok(self.region(lik)?.normal_log_prob(theta, sigma))
    }

    /// Short label used in reports and file headers.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

/// `Pr(y ∈ S | θ)`.
pub fn selection_probability(rule: &SelectionRule, lik: &Likelihood, point: ParamPoint) -> Result<f64> {
    match (point, lik) {
        (ParamPoint::Scalar(theta), Likelihood::NormalLocation { sigma }) => {
            Ok(rule.region(lik)?.normal_prob(theta, *sigma))
        }
        (ParamPoint::MeanVar { mu, sigma2 }, Likelihood::MeanAndVariance { n, df }) => match rule {
            SelectionRule::All => Ok(1.0),
            SelectionRule::StatThreshold { stat: Statistic::ModeratedT { nu0, s0sq }, s, direction } => {
                let nodes = ChiSquareNodes::new(*df, DEFAULT_CHI_NODES)?;
                Ok(nodes.moderated_t_selection(mu, sigma2, *n, *df, *nu0, *s0sq, *s, *direction))
            }
            _ => Err(Error::Unsupported(
                "only moderated t thresholds apply to mean-and-variance observations".into(),
            )),
        },
        (ParamPoint::Scalar(_), Likelihood::MeanAndVariance { .. }) => Err(Error::Unsupported(
            "a mean-and-variance likelihood needs a (mu, sigma2) parameter point".into(),
        )),
        (ParamPoint::MeanVar { .. }, Likelihood::NormalLocation { .. }) => Err(Error::Unsupported(
            "the statistic is not defined for a normal-location likelihood".into(),
        )),
    }
}

pub const DEFAULT_CHI_NODES: usize = 201;

/// Quadrature for expectations over `X ~ χ²(df)`, taken in `u = √X` where
/// the integrand is smooth even for small `df`. Weights include the density
/// and are normalized to sum to one.
#[derive(Debug, Clone)]
pub struct ChiSquareNodes {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl ChiSquareNodes {
    pub fn new(df: f64, n: usize) -> Result<Self> {
        if !(df > 0.0) {
            return Err(Error::Domain(format!("degrees of freedom must be positive, got {df}")));
        }
        let centre = df.sqrt();
        let lo = (centre - 9.0).max(0.0);
        let hi = centre + 9.0;
        let grid = crate::numerics::Grid::simpson(lo, hi, n)?;
        let log_norm = 0.5 * df * std::f64::consts::LN_2 + ln_gamma(0.5 * df);
        let mut x = Vec::with_capacity(grid.len());
        let mut w = Vec::with_capacity(grid.len());
        for (&u, &gw) in grid.nodes().iter().zip(grid.weights()) {
            let dens = if u > 0.0 {
                (std::f64::consts::LN_2 + (df - 1.0) * u.ln() - 0.5 * u * u - log_norm).exp()
            } else if df == 1.0 {
                (std::f64::consts::LN_2 - log_norm).exp()
            } else {
                0.0
            };
            x.push(u * u);
            w.push(gw * dens);
        }
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        Ok(ChiSquareNodes { x, w })
    }

    /// `Pr(moderated t passes the cutoff | μ, σ²)`: the sample variance is
    /// integrated on the nodes, the sample mean's normal tails in closed form.
    #[allow(clippy::too_many_arguments)]
    pub fn moderated_t_selection(
        &self,
        mu: f64,
        sigma2: f64,
        n: u32,
        df: f64,
        nu0: f64,
        s0sq: f64,
        cutoff: f64,
        direction: Direction,
    ) -> f64 {
        let nf = n as f64;
        let tau = (sigma2 / nf).sqrt();
        let mut acc = 0.0;
        for (&x, &w) in self.x.iter().zip(&self.w) {
            let s2 = sigma2 * x / df;
            let c = cutoff * (Statistic::moderated_variance(nu0, s0sq, df, s2) / nf).sqrt();
            let p = match direction {
                Direction::Upper => normal_cdf((mu - c) / tau),
                Direction::Lower => normal_cdf((c - mu) / tau),
                Direction::TwoSided => {
                    let c = c.abs();
                    normal_cdf((-c - mu) / tau) + normal_cdf((mu - c) / tau)
                }
            };
            acc += w * p;
        }
        acc.clamp(0.0, 1.0)
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionRule::All => write!(f, "all"),
            SelectionRule::TwoSided { a } => write!(f, "twosided:{a}"),
            SelectionRule::OneSided { a } => write!(f, "onesided:{a}"),
            SelectionRule::Region { region } => {
                write!(f, "region")?;
                for iv in &region.intervals {
                    write!(f, ":{},{}", iv.lo, iv.hi)?;
                }
                Ok(())
            }
            SelectionRule::StatThreshold { stat, s, direction } => {
                let d = match direction {
                    Direction::Upper => "upper",
                    Direction::Lower => "lower",
                    Direction::TwoSided => "abs",
                };
                match stat {
                    Statistic::Z => write!(f, "z:{d}:{s}"),
                    Statistic::ModeratedT { nu0, s0sq } => write!(f, "modt:{d}:{s}:{nu0},{s0sq}"),
                }
            }
            SelectionRule::LossThreshold { loss, s } => write!(f, "loss:{s}:{loss}"),
        }
    }
}

/// `all`, `twosided:A`, `onesided:A`, `region:LO,HI[:LO,HI...]`,
/// `z:{upper|lower|abs}:S`, `modt:{upper|lower|abs}:S:NU0,S0SQ`,
/// `loss:S:<loss>`.
impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h.to_ascii_lowercase(), r),
            None => (s.to_ascii_lowercase(), ""),
        };
        let direction = |d: &str| match d {
            "upper" => Ok(Direction::Upper),
            "lower" => Ok(Direction::Lower),
            "abs" | "two_sided" => Ok(Direction::TwoSided),
            _ => Err(Error::Config(format!("unknown direction '{d}'"))),
        };
        let rule = match head.replace(['-', '_'], "").as_str() {
            "all" | "none" => SelectionRule::All,
            "twosided" => SelectionRule::TwoSided { a: parse_number(rest, "threshold")? },
            "onesided" => SelectionRule::OneSided { a: parse_number(rest, "threshold")? },
            "region" => {
                let mut ivs = Vec::new();
                for p in rest.split(':') {
                    let (lo, hi) = p
                        .split_once(',')
                        .ok_or_else(|| Error::Config(format!("region interval needs LO,HI: '{p}'")))?;
                    ivs.push(Interval::new(parse_number(lo, "lower bound")?, parse_number(hi, "upper bound")?));
                }
                SelectionRule::Region { region: Region::new(ivs) }
            }
            "z" => {
                let (d, v) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("z rule needs DIRECTION:S: '{s}'")))?;
                SelectionRule::StatThreshold { stat: Statistic::Z, s: parse_number(v, "cutoff")?, direction: direction(d)? }
            }
            "modt" => {
                let parts: Vec<&str> = rest.splitn(3, ':').collect();
                if parts.len() != 3 {
                    return Err(Error::Config(format!("modt rule needs DIRECTION:S:NU0,S0SQ: '{s}'")));
                }
                let (nu0, s0sq) = parts[2]
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("modt rule needs NU0,S0SQ: '{s}'")))?;
                SelectionRule::StatThreshold {
                    stat: Statistic::ModeratedT { nu0: parse_number(nu0, "nu0")?, s0sq: parse_number(s0sq, "s0sq")? },
                    s: parse_number(parts[1], "cutoff")?,
                    direction: direction(parts[0])?,
                }
            }
            "loss" => {
                let (v, l) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("loss rule needs S:LOSS: '{s}'")))?;
                SelectionRule::LossThreshold { loss: l.parse()?, s: parse_number(v, "cutoff")? }
            }
            _ => return Err(Error::Config(format!("unknown selection rule '{s}'"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}
