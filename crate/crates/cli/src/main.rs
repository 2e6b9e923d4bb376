//! `vaxdyn`: run scenario files through the simulator, theorem checkers,
//! absorption sweeps and the control solver.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "vaxdyn", version, about = "Stochastic SIR with noisy vaccination choice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one path and print its estimator summary.
    Simulate(CommonArgs),
    /// Print thresholds, equilibria and theorem verdicts.
    Report(CommonArgs),
    /// Estimate absorption probabilities over the scenario's grid.
    Sweep(CommonArgs),
    /// Solve for the optimal vaccination-cost discount.
    Control(CommonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    pub scenario: String,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the step size (years).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Override the horizon (years).
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = match &cli.command {
        Command::Simulate(a) | Command::Report(a) | Command::Sweep(a) | Command::Control(a) => a,
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Report(a) => commands::report(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Control(a) => commands::control(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
