//! `twoway`: design, simulate and compare linear two-way feedback schemes.

mod commands;

use clap::{Parser, Subcommand};
use gtwc_core::Error;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "twoway", version, about = "Linear coding over Gaussian two-way channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for a sum-error minimizing linear scheme and write it as JSON.
    Design(commands::DesignArgs),
    /// Monte Carlo error rates of saved designs, appended to a CSV file.
    Simulate(commands::SimulateArgs),
    /// Error rates over a range of SNR₂ values for several schemes.
    Sweep(commands::SweepArgs),
    /// Repetition-coding simulation and the open-loop finite-length bound.
    Baselines(commands::BaselinesArgs),
    /// Compare the weighted-power optimizer with exhaustive search (N ≤ 4).
    Oracle(commands::OracleArgs),
}

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible(_)) => EXIT_INFEASIBLE,
        Some(Error::InvalidArgument(_)) | Some(Error::CostGuard { .. }) => EXIT_USAGE,
        Some(Error::Data(_)) => EXIT_DATA,
        _ if err.downcast_ref::<commands::UsageError>().is_some() => EXIT_USAGE,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = std::env::var("TWOWAY_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let result = match cli.command {
        Command::Design(a) => commands::design(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Baselines(a) => commands::baselines(a),
        Command::Oracle(a) => commands::oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("twoway: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
