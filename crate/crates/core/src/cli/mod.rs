//! `magspec` command line: `run`, `landau` and `validate`.
//!
//! Exit codes: 0 success or PASS, 2 FAIL, 3 inconclusive, 1 error.

mod config;
mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{parse_config, reference_strength, ConfigError, Experiment, ExperimentConfig, KEYS};
pub use run::{compute, run_experiment, write_outputs, Outcome, Results};

#[derive(Debug, Parser)]
#[command(name = "magspec", version, about = "Spectra of magnetic Schrödinger operators on exterior domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    #[command(after_help = KEYS)]
    Run {
        config: PathBuf,
        /// Output directory; overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for ladder radii and slices [default: logical CPUs].
        #[arg(long)]
        jobs: Option<usize>,
        /// Random seed; overrides seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the Landau-level model for a constant field as JSON.
    Landau {
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 10.0)]
        cutoff: f64,
    },
    /// Parse a config file and print the resolved configuration as JSON.
    #[command(after_help = KEYS)]
    Validate { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

fn dispatch(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::Run { config, out, jobs, seed } => {
            let mut cfg = load(&config)?;
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(j) = jobs {
                crate::exec::set_jobs(j)?;
            }
            let results = run_experiment(&cfg).map_err(|e| e.to_string())?;
            eprintln!(
                "{:?} experiment: {:?}; results in {}",
                results.experiment,
                results.verdict,
                cfg.output.dir.display()
            );
            Ok(results.verdict.exit_code())
        }
        Command::Landau { b, dim, cutoff } => {
            let model = crate::spectra::landau_levels(b, dim, cutoff).map_err(|e| e.to_string())?;
            println!("{}", to_json(&model));
            Ok(0)
        }
        Command::Validate { config } => {
            println!("{}", to_json(&load(&config)?));
            Ok(0)
        }
    }
}

/// Process entry point; returns the exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
