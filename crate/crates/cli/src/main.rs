//! `cellzoom` — batch experiment driver for the privacy-masked cell-zooming
//! simulator.
//!
//! Subcommands run single simulations, noise-robustness comparisons,
//! approximation/truncation sweeps, the confidentiality budget calculator,
//! and scenario generation; results go to stdout as CSV rows and, where an
//! output location is given, to CSV artifacts.
//!
//! Exit codes: 0 success; 1 usage error (bad flags or arguments);
//! 2 configuration error (parameter file, scenario source, flag values);
//! 3 runtime error (solver or I/O failure during execution).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CmdResult, MethodArg};

#[derive(Parser)]
#[command(name = "cellzoom", version, about = "Cell-zooming experiment driver", author = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trace + metrics CSVs
    Simulate {
        /// JSON parameter file (defaults to the built-in reference table)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario source: `reference`, `random`, or a scenario CSV path
        #[arg(long, default_value = "reference")]
        scenario: String,
        /// Per-step solver
        #[arg(long, value_enum, default_value_t = MethodArg::Distributed)]
        method: MethodArg,
        /// Masking-noise scale (0 disables masking)
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        /// Seed driving scenario generation and masking noise
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the coordination-loop iteration budget
        #[arg(long)]
        t_iters: Option<u32>,
        /// Output directory for the CSV artifacts
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Tabulate mean energy efficiency and charging rate per method and rho
    Compare {
        /// JSON parameter file (defaults to the built-in reference table)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario source: `reference`, `random`, or a scenario CSV path
        #[arg(long, default_value = "reference")]
        scenario: String,
        /// Comma-separated masking-noise scales
        #[arg(long, value_delimiter = ',', default_value = "0,2,4,6,8,10")]
        rhos: Vec<f64>,
        /// Masked samples per (method, rho) pair
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Base seed; sample s uses seed + s
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional output directory for compare.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the largest certifiable noise-to-privacy ratio
    PrivacyBudget {
        /// Number of cells whose masked counts are summed
        #[arg(long)]
        n: u32,
        /// Deviation threshold the masked sum must stay within
        #[arg(long)]
        lambda_thresh: f64,
        /// Bound on the probability of exceeding the threshold
        #[arg(long)]
        zeta: f64,
        /// Monte Carlo samples validating the proposed bound (0 skips)
        #[arg(long, default_value_t = 0)]
        mc_samples: usize,
        /// Seed for the Monte Carlo check
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep the active-mode system power and report surrogate errors
    ApproxError {
        /// JSON parameter file (defaults to the built-in reference table)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario source: `reference`, `random`, or a scenario CSV path
        #[arg(long, default_value = "reference")]
        scenario: String,
        /// Lowest active-mode system power (W)
        #[arg(long, default_value_t = 0.5)]
        s_active_min: f64,
        /// Highest active-mode system power (W)
        #[arg(long, default_value_t = 2.5)]
        s_active_max: f64,
        /// Number of sweep points
        #[arg(long, default_value_t = 5)]
        points: usize,
        /// Optional output directory for approx_error.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the coordination-loop iteration budget against T = 30
    TruncationError {
        /// JSON parameter file (defaults to the built-in reference table)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario source: `reference`, `random`, or a scenario CSV path
        #[arg(long, default_value = "reference")]
        scenario: String,
        /// Comma-separated iteration budgets (defaults to 1..=30)
        #[arg(long, value_delimiter = ',')]
        t_values: Option<Vec<u32>>,
        /// Optional output directory for truncation_error.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a scenario CSV with random peaks (or the built-in reference)
    ScenarioGen {
        /// Number of cells
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Seed for the peak draws
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the built-in reference scenario instead of a random one
        #[arg(long, conflicts_with_all = ["n", "seed"])]
        builtin: bool,
        /// Output file path
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CmdResult<()> {
    match cli.command {
        Command::Simulate { config, scenario, method, rho, seed, t_iters, out } => {
            commands::simulate(config.as_deref(), &scenario, method, rho, seed, t_iters, &out)
        }
        Command::Compare { config, scenario, rhos, samples, seed, out } => {
            commands::compare(config.as_deref(), &scenario, &rhos, samples, seed, out.as_deref())
        }
        Command::PrivacyBudget { n, lambda_thresh, zeta, mc_samples, seed } => {
            commands::privacy_budget(n, lambda_thresh, zeta, mc_samples, seed)
        }
        Command::ApproxError { config, scenario, s_active_min, s_active_max, points, out } => {
            commands::approx_error_sweep(
                config.as_deref(),
                &scenario,
                s_active_min,
                s_active_max,
                points,
                out.as_deref(),
            )
        }
        Command::TruncationError { config, scenario, t_values, out } => {
            let t_values = t_values.unwrap_or_else(|| (1..=30).collect());
            commands::truncation_error_sweep(config.as_deref(), &scenario, &t_values, out.as_deref())
        }
        Command::ScenarioGen { n, seed, builtin, out } => {
            commands::scenario_gen(n, seed, builtin, &out)
        }
    }
}

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => match run(cli) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code())
            }
        },
        Err(e) => {
            // --help and --version land here too; they exit 0, while true
            // usage errors exit 1 rather than clap's default of 2 (reserved
            // for configuration errors).
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            ExitCode::from(code)
        }
    }
}
