mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use serde_json::json;

use args::{Cli, Command};
use config::Ctx;

/// Failure of a run: usage problems exit with 2, failed computations with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(sabayes::Error),
}

impl From<sabayes::Error> for CliError {
    fn from(e: sabayes::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Run(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Run(e.into())
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Posterior(_) => "posterior",
        Command::FreqCi(_) => "freq-ci",
        Command::Risk(_) => "risk",
        Command::Calibrate(_) => "calibrate",
        Command::Bh(_) => "bh",
        Command::Fcr(_) => "fcr",
        Command::Simulate(_) => "simulate",
        Command::Replicate(_) => "replicate",
        Command::Microarray(_) => "microarray",
        Command::Figure(_) => "figure",
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut ctx = Ctx::new(command_name(&cli.command), &cli.global)?;
    if let Some(n) = ctx.workers(cli.global.workers) {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| sabayes::Error::Config(format!("cannot start {n} workers: {e}")))?;
    }
    let report = match &cli.command {
        Command::Posterior(a) => commands::inference::posterior(&mut ctx, a)?,
        Command::FreqCi(a) => commands::inference::freq_ci(&mut ctx, a)?,
        Command::Risk(a) => commands::inference::risk(&mut ctx, a)?,
        Command::Calibrate(a) => commands::inference::calibrate(&mut ctx, a)?,
        Command::Bh(a) => commands::testing::bh(&mut ctx, a)?,
        Command::Fcr(a) => commands::testing::fcr(&mut ctx, a)?,
        Command::Simulate(a) => commands::simulation::simulate(&mut ctx, a)?,
        Command::Replicate(a) => commands::simulation::replicate(&mut ctx, a)?,
        Command::Microarray(a) => commands::array::microarray(&mut ctx, a)?,
        Command::Figure(a) => commands::figure::figure(&mut ctx, a)?,
    };
    output::emit(&ctx, report)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            let name = command_name(&cli.command);
            let mut cmd = Cli::command();
            let usage = cmd
                .find_subcommand_mut(name)
                .map(|c| c.render_usage().to_string())
                .unwrap_or_default();
            eprintln!("error: {msg}\n\n{usage}\n\nFor more information, try 'sabayes {name} --help'.");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            let diag = json!({
                "status": "error",
                "command": command_name(&cli.command),
                "kind": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{diag}");
            ExitCode::from(1)
        }
    }
}
