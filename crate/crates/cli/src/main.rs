//! Batch CLI for the keyframe-detection engine.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 model error.

mod commands;
mod error;

use clap::error::ErrorKind;
use clap::Parser;
use std::process::ExitCode;

use commands::{Cli, Command};
use error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score(args) => commands::score(args),
        Command::MetricOnly(args) => commands::metric_only(args),
        Command::GruScore(args) => commands::gru_score(args),
        Command::GruTrain(args) => commands::gru_train(args),
        Command::BuildPairs(args) => commands::build_pairs(args),
        Command::Select(args) => commands::select(args),
        Command::SplitDataset(args) => commands::split_dataset(args),
        Command::SampleEpoch(args) => commands::sample_epoch(args),
        Command::Stats(args) => commands::stats(args),
    }
}
