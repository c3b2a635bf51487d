use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use condgeo::runner::{self, verify, RunError};

#[derive(Parser)]
#[command(name = "condgeo", version, about = "Conditional Wasserstein geometry toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write report.json plus artifacts.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's output_dir, else out/<stem> beside it).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in invariant suite.
    Verify {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// List check names and exit.
        #[arg(long)]
        list: bool,
    },
    /// Write one artifact of a saved report as long-format CSV to stdout.
    Plot {
        report: PathBuf,
        #[arg(long)]
        artifact: String,
    },
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let (outcome, dir) = runner::run_scenario(&config, out.as_deref(), seed)?;
            for c in &outcome.report.checks {
                println!("{}", c.line());
            }
            println!("wrote {}", dir.join("report.json").display());
            match outcome.report.failures() {
                0 => Ok(()),
                n => Err(RunError::ChecksFailed(n)),
            }
        }
        Command::Verify { filter, seed, list } => {
            if list {
                verify::check_names().iter().for_each(|n| println!("{n}"));
                return Ok(());
            }
            let checks = verify::run_suite(filter.as_deref(), seed)?;
            for c in &checks {
                println!("{}", c.line());
            }
            let failed = checks.iter().filter(|c| c.failed()).count();
            println!("{} checks, {} failed", checks.len(), failed);
            match failed {
                0 => Ok(()),
                n => Err(RunError::ChecksFailed(n)),
            }
        }
        Command::Plot { report, artifact } => runner::emit_plot_data(&report, &artifact, std::io::stdout().lock()),
    }
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
