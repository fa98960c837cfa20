//! Run configuration: the JSON parameter document, scenario sources, and
//! the error classification every subcommand maps onto exit codes.
//!
//! Errors come in two flavors. `Config` covers anything wrong with what
//! the user asked for — unreadable or invalid parameter files, bad flag
//! values, unresolvable scenario sources, an unusable output directory —
//! and exits with code 2. `Runtime` covers failures after a valid
//! configuration — solver errors and I/O failures while writing artifacts —
//! and exits with code 3. Usage errors (unknown flags, missing arguments)
//! never reach this module; the argument parser reports them and the
//! process exits with code 1.

use std::fmt;
use std::path::Path;

use cellzoom::harness::{random_scenario, read_scenario_csv, Method, Scenario};
use cellzoom::local_solver::LocalSolverKind;
use cellzoom::model::SimParams;
use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

/// A classified subcommand failure; the variant picks the exit code.
#[derive(Debug)]
pub enum CliError {
    /// The request itself is unusable (exit code 2).
    Config(String),
    /// A valid request failed while executing (exit code 3).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

/// Result alias for subcommand bodies.
pub type CmdResult<T> = Result<T, CliError>;

/// Wraps any displayable error as a configuration failure.
pub fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Wraps any displayable error as a runtime failure.
pub fn runtime_err(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// The JSON parameter document. Every key is required and mirrors a
/// simulation parameter, with units spelled out in the key name; energies
/// are given in kJ and converted to joules internally so the file never
/// mixes scales silently.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: usize,
    pub area_km2: f64,
    pub x_max_kj: f64,
    pub x0_kj: f64,
    pub gamma: f64,
    pub h_s: f64,
    pub u_macro: f64,
    pub s_active_w: f64,
    pub s_sleep_w: f64,
    pub sigma_dbm: f64,
    pub z_dbm: f64,
    pub q: f64,
    pub s_bit: f64,
    pub lambda: f64,
    pub c: f64,
    pub u_thres_w: f64,
    pub t_iters: u32,
    pub alpha0: f64,
}

impl ConfigFile {
    /// Converts to validated simulation parameters (kJ keys become J).
    pub fn into_params(self) -> CmdResult<SimParams> {
        SimParams {
            n: self.n,
            area_km2: self.area_km2,
            x_max: 1000.0 * self.x_max_kj,
            x0: 1000.0 * self.x0_kj,
            gamma: self.gamma,
            h: self.h_s,
            u_macro: self.u_macro,
            s_active: self.s_active_w,
            s_sleep: self.s_sleep_w,
            sigma_dbm: self.sigma_dbm,
            z_dbm: self.z_dbm,
            q: self.q,
            s_bit: self.s_bit,
            lambda: self.lambda,
            c: self.c,
            u_thres: self.u_thres_w,
            t_iters: self.t_iters,
            alpha0: self.alpha0,
        }
        .validated()
        .map_err(config_err)
    }
}

/// Loads simulation parameters: the built-in reference table when no file
/// is given, otherwise the JSON document at `path`.
pub fn load_params(path: Option<&Path>) -> CmdResult<SimParams> {
    let Some(path) = path else {
        return Ok(SimParams::reference());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    file.into_params()
}

/// Resolves a scenario source string: `reference` names the built-in
/// reference scenario, `random` draws peaks from the seeded generator with
/// the configured cell count, and anything else is read as a scenario CSV
/// path. The result must match the configured cell count.
pub fn resolve_scenario(source: &str, params: &SimParams, seed: u64) -> CmdResult<Scenario> {
    let scenario = match source {
        "reference" => Scenario::reference(),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_scenario(params.n, &mut rng)
        }
        path => read_scenario_csv(Path::new(path)).map_err(config_err)?,
    };
    if scenario.n != params.n {
        return Err(CliError::Config(format!(
            "scenario `{source}` has {} cells but the configuration expects n = {}",
            scenario.n, params.n
        )));
    }
    Ok(scenario)
}

/// Per-step solver choice as it appears on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Exact enumeration baseline (central controller, masked counts only).
    Centralized,
    /// Coordinated per-cell solvers with the closed-form local step.
    Distributed,
    /// Coordinated per-cell solvers with the bisection local step.
    DistributedExact,
}

impl MethodArg {
    pub fn to_method(self) -> Method {
        match self {
            MethodArg::Centralized => Method::Centralized,
            MethodArg::Distributed => Method::Distributed(LocalSolverKind::ClosedForm),
            MethodArg::DistributedExact => Method::Distributed(LocalSolverKind::Exact),
        }
    }
}
