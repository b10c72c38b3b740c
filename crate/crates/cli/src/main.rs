//! `mtom`: train, evaluate and verify many-to-one shaped constellations.
//!
//! Every command writes into its own output directory: the CSV or LUT
//! artifacts plus a `manifest.json` recording inputs, their hashes and the
//! seed.

mod args;
mod commands;
mod failure;
mod grid;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = args::Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
