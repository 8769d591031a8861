//! `stackstl`: synthesize leader plans, monitor traces, verify outcomes and
//! rerun the bundled case studies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod plot;

use config::RunConfig;
use error::code;

#[derive(Debug, Parser)]
#[command(name = "stackstl", version, about = "Leader-follower STL control synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a leader plan for a scenario file.
    Synthesize {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Evaluate a formula on a trajectory CSV.
    Monitor {
        trace: PathBuf,
        formula: String,
        /// Scenario whose state names the formula uses; without it the
        /// names are x_0, x_1, ...
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Evaluation time step.
        #[arg(long, default_value_t = 0)]
        time: usize,
    },
    /// Re-check a stored outcome against its scenario.
    Verify {
        outcome: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the backend recorded in the outcome.
        #[arg(long)]
        backend: Option<String>,
        /// Overrides the recorded number of random follower samples.
        #[arg(long)]
        verify_samples: Option<usize>,
    },
    /// Rerun a bundled case study (1 or 2) and tabulate costs.
    Reproduce {
        case: u32,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Write the first master problem as an LP file.
    ExportLp {
        #[arg(long)]
        scenario: PathBuf,
        /// Destination; defaults to `<out>/<scenario>.<mode>.lp`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; --help and --version are not
            return ExitCode::from(if e.use_stderr() { code::INPUT } else { code::SUCCESS });
        }
    };
    let result = match &cli.command {
        Command::Synthesize { scenario, run } => commands::cmd_synthesize(scenario, run),
        Command::Monitor {
            trace,
            formula,
            scenario,
            time,
        } => commands::cmd_monitor(trace, formula, scenario.as_deref(), *time),
        Command::Verify {
            outcome,
            scenario,
            backend,
            verify_samples,
        } => commands::cmd_verify(outcome, scenario, backend.as_deref(), *verify_samples),
        Command::Reproduce { case, run } => commands::cmd_reproduce(*case, run),
        Command::ExportLp { scenario, output, run } => commands::cmd_export_lp(scenario, run, output.as_deref()),
    };
    match result {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
