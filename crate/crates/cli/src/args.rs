use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "sabayes", version, about = "Selection-adjusted Bayesian inference for selected parameters")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed of the random streams (default: $SABAYES_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (default: standard output).
    #[arg(long, short, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for replication and gene loops (outputs do not depend on it).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Selection-adjusted posterior of a selected parameter.
    Posterior(PosteriorArgs),
    /// Frequentist confidence set from the truncated likelihood.
    FreqCi(FreqCiArgs),
    /// saBayes risk of a selection rule.
    Risk(RiskArgs),
    /// Selection rule of a one-parameter family with a target saBayes risk.
    Calibrate(CalibrateArgs),
    /// Benjamini-Hochberg step-up procedure on a p-value file.
    Bh(BhArgs),
    /// FCR-adjusted marginal intervals for selected parameters.
    Fcr(FcrArgs),
    /// Draw (theta, y) from a generative model, optionally truncated to a rule.
    Simulate(SimulateArgs),
    /// Repeated experiments with discovery and coverage bookkeeping.
    Replicate(ReplicateArgs),
    /// Moderated-t analysis of per-gene summary statistics.
    Microarray(MicroarrayArgs),
    /// Data behind one of the six figures, as CSV.
    Figure(FigureArgs),
}

/// Model flags shared by the scalar-observation commands. PRIOR, KIND and
/// RULE take the compact forms documented in the README, inline JSON, or a
/// path to a JSON file.
#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    /// JSON file with `prior`, `likelihood` and `kind` entries.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub prior: Option<String>,
    /// Noise standard deviation of the normal-location likelihood.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PosteriorArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// random, fixed, or a JSON mixed-effect specification.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Also report the posterior without selection adjustment.
    #[arg(long)]
    pub unadjusted: bool,
    /// Two selected compounds `Y1,Y2` with `Y2 >= Y1` and a shared hyperparameter.
    #[arg(long, value_name = "Y1,Y2", allow_hyphen_values = true)]
    pub compound: Option<String>,
    /// Conditional variance of the compound effects around the shared hyperparameter.
    #[arg(long)]
    pub hyper_var: Option<f64>,
    #[arg(long)]
    pub sampling_var: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FreqCiArgs {
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
    /// One minus the confidence level.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub loss: Option<String>,
    /// Number of parallel units behind `expected_discoveries`.
    #[arg(long)]
    pub m: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// twosided, onesided or loss.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub loss: Option<String>,
    /// Target saBayes risk.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BhArgs {
    #[arg(long)]
    pub q: Option<f64>,
    /// CSV with a header row; the column `p` (or `pvalue`, else the first) is used.
    #[arg(long, value_name = "FILE")]
    pub pvalues: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FcrArgs {
    #[arg(long)]
    pub q: Option<f64>,
    /// Family size the selection was made from.
    #[arg(long)]
    pub m: Option<usize>,
    /// CSV with columns `index,y,sigma` and an optional `theta` for coverage.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SpecArgs {
    /// JSON generative specification.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Built-in specification: `mixture` or `mixture-blocks`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Number of units, overriding the specification.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Draw from the distribution truncated to this rule instead.
    #[arg(long)]
    pub rule: Option<String>,
    /// Unit whose observation the rule applies to.
    #[arg(long)]
    pub target: Option<usize>,
    /// Accepted realizations to draw under truncation.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// A fixed rule, or `bh:Q` for BH rerun in every replication.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Record false coverage proportions of the interval families.
    #[arg(long)]
    pub coverage: bool,
    /// Also write the per-replication rows as CSV here.
    #[arg(long, value_name = "FILE")]
    pub rows: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MicroarrayArgs {
    /// Gene summary CSV `id,ybar,s2[,n,df]`.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Prior degrees of freedom; given with `--s0sq` it overrides the fit.
    #[arg(long)]
    pub nu0: Option<f64>,
    #[arg(long)]
    pub s0sq: Option<f64>,
    /// Laplace rate of the effect prior.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Fit the Laplace rate by marginal likelihood instead of the default.
    #[arg(long)]
    pub fit_rate: bool,
    /// Replicates per gene when the input gives none, and for reports without data.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub df: Option<f64>,
    /// Discovery rules: `modt:A`, `rho:S`, `bh:Q`, `bh-raw:Q`, `all`. Repeatable.
    #[arg(long = "rule")]
    pub rules: Vec<String>,
    /// Report the saBayes risk of each rule.
    #[arg(long)]
    pub risk: bool,
    /// Calibrate the moderated-t and loss-threshold families to this risk.
    #[arg(long)]
    pub calibrate: Option<f64>,
    /// Posterior summaries for this gene id.
    #[arg(long)]
    pub gene: Option<String>,
    /// Gene statistics when no input file is given.
    #[arg(long, allow_hyphen_values = true)]
    pub ybar: Option<f64>,
    #[arg(long)]
    pub s2: Option<f64>,
    /// Emit per-gene rows.
    #[arg(long)]
    pub genes: bool,
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// Figure number, 1 to 6.
    #[arg(value_parser = clap::value_parser!(u8).range(1..=6))]
    pub number: u8,
    /// Units of the simulated experiment (figures 1 to 4).
    #[arg(long)]
    pub m: Option<usize>,
    /// Accepted realizations per panel (figure 2).
    #[arg(long)]
    pub n: Option<usize>,
    /// Observations whose posteriors are drawn (figure 3), comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub ys: Option<String>,
    /// Gene summary CSV (figures 5 and 6).
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Highlighted gene (figures 5 and 6).
    #[arg(long)]
    pub gene: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub ybar: Option<f64>,
    #[arg(long)]
    pub s2: Option<f64>,
}
