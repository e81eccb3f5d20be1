use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::prior::Prior;
use crate::error::{Error, Result};

/// Conditional prior `π₁(θ | λ)` of a hierarchical ("mixed") effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionalPrior {
    /// `θ | λ ~ N(λ, var)`; `var = 0` makes θ equal to λ.
    NormalLocation { var: f64 },
    /// `θ | λ ~ Laplace(rate = λ)`.
    LaplaceRate,
}

impl ConditionalPrior {
    pub fn at(&self, lambda: f64) -> Result<Prior> {
        match self {
            ConditionalPrior::NormalLocation { var } => {
                if *var == 0.0 {
                    Ok(Prior::PointMass { at: lambda })
                } else {
                    Prior::normal(lambda, *var)
                }
            }
            ConditionalPrior::LaplaceRate => Prior::laplace(lambda),
        }
    }

    /// True when θ is a deterministic function of λ.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, ConditionalPrior::NormalLocation { var } if *var == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConditionalPrior::NormalLocation { var } if !(var.is_finite() && *var >= 0.0) => {
                Err(Error::Config(format!("conditional variance must be non-negative, got {var}")))
            }
            _ => Ok(()),
        }
    }
}

/// How the parameter relates to the selection event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    /// θ is redrawn together with y: selection cancels from the posterior.
    #[default]
    Random,
    /// θ is generated before y and held fixed: the likelihood is truncated.
    Fixed,
    /// λ is held fixed while θ given λ is redrawn with y.
    Mixed { hyperprior: Prior, conditional: ConditionalPrior },
}

impl EffectKind {
    pub fn validate(&self) -> Result<()> {
        if let EffectKind::Mixed { hyperprior, conditional } = self {
            if !hyperprior.is_proper() {
                return Err(Error::Config("a mixed effect needs a proper hyperprior".into()));
            }
            hyperprior.validate()?;
            conditional.validate()?;
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            EffectKind::Random => "random",
            EffectKind::Fixed => "fixed",
            EffectKind::Mixed { .. } => "mixed",
        }
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `random` or `fixed`; mixed effects are configured through JSON.
impl FromStr for EffectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(EffectKind::Random),
            "fixed" => Ok(EffectKind::Fixed),
            "mixed" => Err(Error::Config(
                "a mixed effect needs a hyperprior and conditional prior; supply it in the JSON config".into(),
            )),
            other => Err(Error::Config(format!("unknown effect kind '{other}'"))),
        }
    }
}
