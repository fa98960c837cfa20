//! Cell zooming for off-grid, energy-harvesting small-cell base stations
//! (SBSs) operating under one grid-powered macro base station (MBS).
//!
//! "Cell zooming" here means jointly choosing each SBS's transmission power
//! and active/sleep mode at every sampling instant, trading the number of
//! served users against battery depletion. The crate provides:
//!
//! * [`model`] — the physical layer: battery dynamics, the user-association
//!   function `F(u, U) = r·U·u^{10/19}`, and the coverage coefficient `r`
//!   derived from radio constants.
//! * [`approx`] — the convex per-SBS surrogate problem (box bound `u_max`,
//!   local objective `f`, coupling function `g`).
//! * [`local_solver`] — exact and closed-form solvers for the per-SBS
//!   subproblem, via a scalar root equation and its cubic approximation.
//! * [`distributed`] — the dual-decomposition control loop: SBS agents solve
//!   local problems against a shared multiplier that the MBS coordinator
//!   updates from privacy-masked constraint evaluations.
//! * [`centralized`] — the exact mixed-integer baseline that enumerates all
//!   2^N sleep/active schedules.
//! * [`privacy`] — the Laplace masking mechanism, its tail bound `psi_N`, and
//!   the confidentiality-vs-accuracy budget calculator.
//! * [`harness`] — synthetic scenarios, multi-day simulation runs, metrics,
//!   and CSV import/export.
//!
//! All internal quantities are strict SI: joules, watts, seconds. Any kJ
//! values from configuration files must be converted before they reach
//! [`model::SimParams`].

pub mod approx;
pub mod centralized;
pub mod distributed;
pub mod erf;
pub mod harness;
pub mod local_solver;
pub mod model;
pub mod privacy;

/// Errors shared by every module in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A simulation parameter violates its documented invariant.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// A function argument is outside the mathematical domain of the
    /// operation (e.g. `inv_erfc` of a value not in (0, 2)).
    #[error("domain error: {0}")]
    Domain(String),

    /// Paired vectors (states, counts, harvests, ...) disagree in length.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An input or intermediate value is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The exhaustive 2^N schedule enumeration refuses to run.
    #[error("enumeration guard: {0}")]
    EnumerationGuard(String),

    /// Reading or writing a scenario/trace/metrics file failed.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// A CSV file did not match the expected layout.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
