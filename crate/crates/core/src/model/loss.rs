use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::prior::parse_number;
use super::region::{Interval, Region};
use crate::error::{Error, Result};

/// Loss functions for discovery decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `I(sign θ ≠ sign y)`, with `y ≥ 0` counted as a positive call and
    /// `θ = 0` disagreeing with every call.
    Directional,
    /// `I(θ ∉ region)`: the discovery claims θ lies in `region`.
    Membership { region: Region },
    /// `I(θ = 0)` under a prior with an atom at zero.
    TwoGroupNull,
}

impl Loss {
    pub fn name(&self) -> &'static str {
        match self {
            Loss::Directional => "directional",
            Loss::Membership { .. } => "membership",
            Loss::TwoGroupNull => "two_group_null",
        }
    }

    /// Loss at a parameter value for a decision taken at observation `y`.
    pub fn value(&self, theta: f64, y: f64) -> f64 {
        let bad = match self {
            Loss::Directional => {
                if y >= 0.0 {
                    theta <= 0.0
                } else {
                    theta >= 0.0
                }
            }
            Loss::Membership { region } => !region.contains(theta),
            Loss::TwoGroupNull => theta == 0.0,
        };
        if bad {
            1.0
        } else {
            0.0
        }
    }

    /// Parameter-space region on which the loss equals one, given the sign
    /// of the decision. Continuous-part integrals use it; whether atoms on
    /// the region boundary count is decided by [`Loss::value`].
    pub fn loss_region(&self, y: f64) -> Region {
        match self {
            Loss::Directional => {
                if y >= 0.0 {
                    Region::at_most(0.0)
                } else {
                    Region::at_least(0.0)
                }
            }
            Loss::Membership { region } => region.complement(),
            Loss::TwoGroupNull => Region::empty(),
        }
    }

    /// Parameter values where the loss is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Loss::Directional => vec![0.0],
            Loss::Membership { region } => region.edges(),
            Loss::TwoGroupNull => vec![],
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loss::Membership { region } => {
                write!(f, "membership")?;
                for iv in &region.intervals {
                    write!(f, ":{},{}", iv.lo, iv.hi)?;
                }
                Ok(())
            }
            other => f.write_str(other.name()),
        }
    }
}

/// `directional`, `two_group_null`, or `membership:LO,HI[:LO,HI...]` where a
/// bound may be `-inf`/`inf`.
impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or("").to_ascii_lowercase().replace('-', "_");
        match head.as_str() {
            "directional" => Ok(Loss::Directional),
            "two_group_null" | "null" => Ok(Loss::TwoGroupNull),
            "membership" => {
                let mut ivs = Vec::new();
                for p in parts {
                    let (lo, hi) = p
                        .split_once(',')
                        .ok_or_else(|| Error::Config(format!("membership interval needs LO,HI: '{p}'")))?;
                    ivs.push(Interval::new(parse_number(lo, "lower bound")?, parse_number(hi, "upper bound")?));
                }
                if ivs.is_empty() {
                    return Err(Error::Config("membership loss needs at least one interval".into()));
                }
                Ok(Loss::Membership { region: Region::new(ivs) })
            }
            _ => Err(Error::Config(format!("unknown loss '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directional_values() {
        let l = Loss::Directional;
        assert_eq!(l.value(1.0, 3.5), 0.0);
        assert_eq!(l.value(-1.0, 3.5), 1.0);
        assert_eq!(l.value(0.0, -2.0), 1.0);
        assert_eq!(l.value(0.2, 0.0), 0.0);
    }

    #[test]
    fn parsing() {
        assert_eq!("directional".parse::<Loss>().unwrap(), Loss::Directional);
        let m: Loss = "membership:0,inf".parse().unwrap();
        assert_eq!(m.value(-0.1, 1.0), 1.0);
        assert_eq!(m.value(0.1, 1.0), 0.0);
        assert_eq!(m.to_string().parse::<Loss>().unwrap(), m);
        match "squared".parse::<Loss>() {
            Err(Error::Config(_)) => {}
            other => panic!("{other:?}"),
        }
    }
}
