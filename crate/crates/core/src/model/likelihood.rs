use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::normal_log_pdf;

/// Sampling model linking the parameter to the observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// `y ~ N(θ, sigma²)`.
    NormalLocation { sigma: f64 },
    /// Sample mean `ȳ ~ N(μ, σ²/n)` independent of the sample variance
    /// `s² ~ σ²·χ²(df)/df`.
    MeanAndVariance { n: u32, df: f64 },
}

impl Default for Likelihood {
    fn default() -> Self {
        Likelihood::NormalLocation { sigma: 1.0 }
    }
}

impl Likelihood {
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Likelihood::NormalLocation { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                Err(Error::Config(format!("sigma must be finite and positive, got {sigma}")))
            }
            Likelihood::MeanAndVariance { n, df } if *n < 2 || !(df.is_finite() && *df >= 1.0) => {
                Err(Error::Config(format!("need n >= 2 and df >= 1, got n = {n}, df = {df}")))
            }
            _ => Ok(()),
        }
    }

    /// Noise scale for scalar observations.
    pub fn sigma(&self) -> Result<f64> {
        match self {
            Likelihood::NormalLocation { sigma } => Ok(*sigma),
            Likelihood::MeanAndVariance { .. } => Err(Error::Unsupported(
                "this operation needs a scalar-observation likelihood; use the microarray routines for mean-and-variance data".into(),
            )),
        }
    }

    /// `log f(y | θ)` for scalar observations.
    pub fn log_density(&self, y: f64, theta: f64) -> Result<f64> {
        let s = self.sigma()?;
        Ok(normal_log_pdf((y - theta) / s) - s.ln())
    }
}
