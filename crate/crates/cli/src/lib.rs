//! Command-line driver for `qkd-core`: sessions, sweeps, thresholds, repeater
//! curves and analytic-vs-Monte Carlo comparison.

pub mod commands;
pub mod config;
pub mod csv_out;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Output;
pub use config::{Experiment, Overrides, RawConfig};
pub use csv_out::CsvCurve;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
        }
    }

    pub(crate) fn from_validation(e: qkd_core::QkdError) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn runtime(e: qkd_core::QkdError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub const EXIT_COMPARISON_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qkd", version, about = "Quantum key distribution simulator and security analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write the command's CSV curve here.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Overrides `protocol.seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides `protocol.n_pulses`.
    #[arg(long, global = true, value_name = "N")]
    pub pulses: Option<usize>,
    /// Worker threads for sweeps (default: all cores). Output does not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Subcommand)]
pub enum Command {
    /// Run one session and distil its key.
    Simulate,
    /// Closed-form rate model over the `[sweep]` range.
    Sweep,
    /// Security thresholds on the error rate.
    Thresholds,
    /// Exact expectations against a simulated session; exit 3 if any |z| > 4.
    Compare {
        /// Shift the analytic QBER by this amount (harness self-test).
        #[arg(long, hide = true, default_value_t = 0.0, allow_negative_numbers = true)]
        perturb: f64,
    },
    /// Net rate of a segmented link for each `[repeater] sections` count.
    Repeater,
    /// Step-by-step key distillation with an advantage-distillation table.
    DistillDemo,
}

fn experiment(cli: &Cli) -> Result<Experiment, CliError> {
    let raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    raw.into_experiment(Overrides {
        seed: cli.seed,
        pulses: cli.pulses,
    })
}

/// Runs the command and writes the CSV, returning the report and exit code.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let exec = || -> Result<Output, CliError> {
        let out = match cli.command {
            Command::Thresholds => commands::thresholds(),
            cmd => {
                let exp = experiment(cli)?;
                match cmd {
                    Command::Simulate => commands::simulate(&exp)?,
                    Command::Sweep => commands::sweep(&exp)?,
                    Command::Compare { perturb } => commands::compare(&exp, perturb)?,
                    Command::Repeater => commands::repeater(&exp)?,
                    Command::DistillDemo => commands::distill_demo(&exp)?,
                    Command::Thresholds => unreachable!(),
                }
            }
        };
        if let (Some(path), Some(csv)) = (&cli.out, &out.csv) {
            csv.write(path)?;
        }
        Ok(out)
    };
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(exec),
        None => exec(),
    }
}
