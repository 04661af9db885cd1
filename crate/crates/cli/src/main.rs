//! `fplm` command-line front end.
//!
//! Exit codes: 0 on success, 1 when loading data, fitting or writing fails,
//! 2 for bad flags, config files or paths.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CommonArgs, Resolved, StudyArgs};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "fplm", version, about = "Functional partial linear regression with Bayesian bandwidths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a simulated dataset (`data.csv`, `summary.json`).
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Sample the bandwidths and write the fit (`summary.json`, `chain.csv`,
    /// `density.csv`, and `predictions.csv` when `--n-train` holds units out).
    Fit {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Predict new curves from a fit's `summary.json`.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        /// `summary.json` written by `fit`.
        #[arg(long)]
        fit: Option<PathBuf>,
    },
    /// Rank semi-metrics by marginal likelihood (`report.csv`, `summary.json`).
    SelectSemimetric {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Replication study on simulated curves, or a bootstrap study on a
    /// dataset (`report.csv`, `records.csv`, `summary.json`).
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        study: StudyArgs,
        #[command(flatten)]
        bench: BenchArgs,
    },
}

#[derive(Debug, Clone, Args)]
struct BenchArgs {
    /// Bootstrap the input dataset with this many resamples.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Bootstrap the Tecator data (100 resamples unless `--bootstrap` says otherwise).
    #[arg(long)]
    tecator: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common, study } => commands::simulate(&Resolved::from_args(common, study, None)?),
        Command::Fit { common } => commands::fit(&Resolved::from_args(common, StudyArgs::default(), None)?),
        Command::Predict { common, fit } => commands::predict(&Resolved::from_args(common, StudyArgs::default(), fit)?),
        Command::SelectSemimetric { common } => {
            commands::select(&Resolved::from_args(common, StudyArgs::default(), None)?)
        }
        Command::Bench { common, study, bench } => {
            let r = Resolved::from_args(common, study, None)?;
            let resamples = bench.bootstrap.or(r.bootstrap);
            let bootstrap = if bench.tecator || r.tecator || resamples.is_some() {
                Some(resamples.unwrap_or(100))
            } else {
                None
            };
            commands::bench(&r, bootstrap)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
