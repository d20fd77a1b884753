//! `vigan` command-line tool.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 verification
//! failure.

mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use settings::Failure;
use vigan::ViganError;

#[derive(Parser, Debug)]
#[command(
    name = "vigan",
    version,
    about = "Missing-view imputation for two-view tabular data"
)]
struct Cli {
    /// Only print warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    /// Also print debug messages.
    #[arg(short, long, global = true, conflicts_with = "quiet")]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic two-view dataset directory.
    GenData(commands::GenDataArgs),
    /// Train a model with the three-stage schedule.
    Train(commands::TrainArgs),
    /// Impute the missing view for rows of the present one.
    Impute(commands::ImputeArgs),
    /// Score a trained model on a dataset's held-out rows.
    Evaluate(commands::EvaluateArgs),
    /// Score a baseline imputer (mean or soft-impute).
    Baseline(commands::BaselineArgs),
    /// Finite-difference check of every gradient of the training objective.
    Gradcheck(commands::GradcheckArgs),
}

fn exit_status(err: &anyhow::Error) -> u8 {
    if let Some(f) = err.downcast_ref::<Failure>() {
        return match f {
            Failure::Usage(_) => 1,
            Failure::Verification(_) => 3,
        };
    }
    match err.downcast_ref::<ViganError>() {
        Some(ViganError::InvalidArgument(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Warn
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .parse_default_env()
        .init();

    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Impute(a) => commands::impute(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
