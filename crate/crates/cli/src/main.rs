use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod args;
mod commands;
mod common;
mod config;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::FAILURE,
            };
        }
    };
    let result = match &cli.command {
        Command::Calibrate(a) => commands::calibrate::run(a).map(|_| false),
        Command::Scenarios(a) => commands::scenarios::run(a).map(|_| false),
        Command::Simulate(a) => commands::simulate::run(a).map(|_| false),
        Command::Detect(a) => commands::detect::run(a),
        Command::Batch(a) => commands::batch::run(a).map(|_| false),
    };
    match result {
        Ok(true) => ExitCode::from(2),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
