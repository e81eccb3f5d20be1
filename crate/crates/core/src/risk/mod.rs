//! saBayes risk of selection rules, calibration of FDR-controlling rules and
//! the two-group specialization.

pub mod calibrate;
pub mod ebayes;
pub mod marginal;
pub mod sabayes;
pub mod two_group;

pub use calibrate::{calibrate_rule, Calibration, RuleFamily, CALIBRATION_TOLERANCE};
pub use ebayes::{fit_prior, marginal_log_likelihood, PriorFit, PriorFamily};
pub use marginal::{log_joint_interval, log_marginal_density, marginal_density, posterior_risk, truncated_marginal};
pub use sabayes::{
    constant_discovery_pfdr, resolve_region, resolve_rule, sabayes_risk, sabayes_risk_for, sabayes_risk_per_y,
    RiskDiagnostics, RiskReport,
};
pub use two_group::{fixed_two_group_posterior, two_group, upper_region, NestedFamily, QvaluePoint, TwoGroupReport};
