//! `staggerdid` command-line front end.

mod commands;
mod config;
mod data;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "staggerdid", version, about = "Staggered difference-in-differences toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic panel with its ground truth.
    Simulate(Overrides),
    /// Group-time effects, aggregates and bootstrap bands per gender.
    Estimate(Overrides),
    /// Shock distribution, pre/post means and de-trended outcome series.
    Diagnose(Overrides),
    /// Propensity-score matching of women to men with balance tables.
    Match(Overrides),
    /// Two-way fixed effects event study with placebo-dated controls.
    Twfe(Overrides),
    /// Female-minus-male triple difference event study.
    Tripledid(Overrides),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (o, f): (&Overrides, fn(&RunConfig) -> Result<(), CliError>) = match &cli.command {
        Command::Simulate(o) => (o, commands::simulate),
        Command::Estimate(o) => (o, commands::estimate),
        Command::Diagnose(o) => (o, commands::diagnose),
        Command::Match(o) => (o, commands::match_genders),
        Command::Twfe(o) => (o, commands::twfe),
        Command::Tripledid(o) => (o, commands::tripledid),
    };
    let cfg = RunConfig::resolve(o)?;
    f(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
