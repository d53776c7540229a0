//! `extshap`: exact and kernel SHAP on tabulated functions, counterexample
//! search and the verification battery.
//!
//! Exit codes: 0 success, 1 a check failed, 2 bad input.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::FunctionSpec;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] extshap_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "extshap", version, about = "SHAP on the extended support of tabular data")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance for zero and determinedness tests.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Directory for output files; created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Format of per-row outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Full,
    Sampled,
}

#[derive(Debug, Clone, Args)]
pub struct FunctionInput {
    /// Background dataset CSV (header row, numeric columns).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `constant[:c]`, `additive`, `product`, `indicator`, or a JSON file
    /// (grid with `values`, or a counterexample report).
    #[arg(long)]
    pub function: FunctionSpec,
    /// When no dataset is given, repeat each support cell this many times.
    #[arg(long, default_value_t = 1)]
    pub copies: usize,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = Mode::Full)]
    pub mode: Mode,
    /// Subset draws per explained row in sampled mode.
    #[arg(long, default_value_t = 2048)]
    pub samples: usize,
    /// Subtract the background mean from the function first.
    #[arg(long)]
    pub center: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact SHAP at every grid cell, under the data distribution and under
    /// the product of its marginals.
    Shap {
        #[command(flatten)]
        input: FunctionInput,
    },
    /// KernelSHAP at every dataset row.
    Kshap {
        #[command(flatten)]
        input: FunctionInput,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Scramble columns, then aggregate KernelSHAP, with a reconstruction
    /// certificate for one feature.
    SoundAggregate {
        #[command(flatten)]
        input: FunctionInput,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        feature: usize,
    },
    /// Search for a function with zero SHAP on the support that still varies
    /// along a feature.
    Counterexample {
        /// Grid shape, e.g. `3x3`.
        #[arg(long)]
        grid: String,
        /// `ring:r_inner:r_outer` or a JSON file holding a boolean array.
        #[arg(long)]
        mask: String,
        #[arg(long, default_value_t = 0)]
        feature: usize,
        /// Constrain SHAP to zero on the whole extended support.
        #[arg(long)]
        full_extended: bool,
    },
    /// Run the property battery; exit 1 if any check fails.
    Verify {
        /// Run only these checks (repeatable).
        #[arg(long = "check")]
        checks: Vec<String>,
        /// Restrict random instances to this many features.
        #[arg(long)]
        d: Option<usize>,
        /// Negate one Shapley weight; the efficiency check must then fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Write a function and its SHAP values as a long-format grid table,
    /// plus one dataset row per support cell.
    ExportGrid {
        #[command(flatten)]
        input: FunctionInput,
        #[arg(long, default_value_t = 0)]
        feature: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    if !(common.tol.is_finite() && common.tol > 0.0) {
        return Err(CliError::Input(format!("--tol must be positive, got {}", common.tol)));
    }
    std::fs::create_dir_all(&common.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", common.out_dir.display())))?;
    match cli.command {
        Command::Shap { input } => commands::shap(common, &input),
        Command::Kshap { input, kernel } => commands::kshap(common, &input, &kernel),
        Command::SoundAggregate { input, kernel, feature } => commands::sound_aggregate(common, &input, &kernel, feature),
        Command::Counterexample { grid, mask, feature, full_extended } => {
            commands::counterexample(common, &grid, &mask, feature, full_extended)
        }
        Command::Verify { checks, d, inject_fault } => commands::verify(common, checks, d, inject_fault),
        Command::ExportGrid { input, feature } => commands::export_grid(common, &input, feature),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
