//! Dual-decomposition coordination of one scheduling timestep.
//!
//! The macro cell's user budget couples the SBSs' otherwise independent
//! subproblems, so it is priced rather than enforced: a multiplier `mu`
//! starts at the previous timestep's value, each SBS minimizes its own
//! objective plus `mu` times its share of the constraint, and the
//! coordinator raises or lowers `mu` along the constraint residual with a
//! diminishing `alpha0 / t` stepsize. Counts travel to the coordinator
//! masked by Laplace noise drawn once per timestep; the noise therefore
//! perturbs only the priced term of each local solve, never the local
//! objective itself.
//!
//! After the final iteration, powers at or below `u_thres` are rounded down
//! to sleep — the one discrete decision the relaxation deferred.

use crate::approx::{build_u_max, coupling};
use crate::local_solver::{solve_local, slope_coeffs, LocalSolverKind};
use crate::model::{coverage_coefficient, SbsState, SimParams};
use crate::privacy::sample_laplace;
use crate::{Error, Result};
use rand::Rng;

/// Per-iteration snapshot for diagnostics and traces.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    /// Iteration index, 1-based.
    pub t: u32,
    /// Local minimizers at this iteration (W).
    pub u: Vec<f64>,
    /// Multiplier after this iteration's update.
    pub mu: f64,
}

/// The outcome of one coordinated timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoomDecision {
    /// Transmission power per SBS (W); zero exactly for sleeping cells.
    pub u: Vec<f64>,
    /// System power per SBS (W), `s_active` or `s_sleep`.
    pub s: Vec<f64>,
    /// Multiplier after the final iteration, seeding the next timestep.
    pub mu_out: f64,
    /// The masked counts transmitted to the coordinator this step.
    pub masked_counts: Vec<f64>,
    /// Per-iteration history, kept only when requested.
    pub iterates: Option<Vec<IterateRecord>>,
}

/// Knobs of [`run_timestep`] that are not physical parameters.
#[derive(Debug, Clone, Copy)]
pub struct TimestepOptions {
    /// Which local solver the SBSs run.
    pub solver: LocalSolverKind,
    /// Record every iteration's `(u, mu)` into the decision.
    pub record_iterates: bool,
}

impl Default for TimestepOptions {
    fn default() -> Self {
        TimestepOptions {
            solver: LocalSolverKind::ClosedForm,
            record_iterates: false,
        }
    }
}

/// Adds one Laplace draw of scale `rho` to every count. The noise is drawn
/// once per timestep and reused across all coordination iterations; with
/// `rho = 0` the counts pass through bit-identically and the random stream
/// is not consumed.
pub fn mask_counts(counts: &[f64], rho: f64, rng: &mut impl Rng) -> Vec<f64> {
    debug_assert!(rho >= 0.0);
    counts
        .iter()
        .map(|&c| c + sample_laplace(rho, rng))
        .collect()
}

/// Diminishing stepsize `alpha0 / t`: divergent sum, convergent square sum.
pub fn stepsize(t: u32, alpha0: f64) -> f64 {
    debug_assert!(t >= 1);
    alpha0 / t as f64
}

/// Projected subgradient step on the dual variable:
/// `max{0, mu + alpha * subgrad}`.
pub fn multiplier_update(mu: f64, alpha: f64, subgrad: f64) -> f64 {
    debug_assert!(mu >= 0.0);
    (mu + alpha * subgrad).max(0.0)
}

/// Runs the full coordination loop for one timestep and returns the
/// thresholded decision.
///
/// The i-th SBS solves with its true count in the objective and the masked
/// count in the priced constraint; the coordinator never sees true counts.
#[allow(clippy::too_many_arguments)]
pub fn run_timestep(
    states: &[SbsState],
    counts: &[f64],
    harvest: &[f64],
    mu_in: f64,
    rho: f64,
    params: &SimParams,
    rng: &mut impl Rng,
    options: &TimestepOptions,
) -> Result<ZoomDecision> {
    let n = params.n;
    if states.len() != n || counts.len() != n || harvest.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n} SBSs, got states: {}, counts: {}, harvest: {}",
            states.len(),
            counts.len(),
            harvest.len()
        )));
    }
    if !(mu_in.is_finite() && mu_in >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "mu_in must be finite and >= 0, got {mu_in}"
        )));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "rho must be finite and >= 0, got {rho}"
        )));
    }
    for (i, (&c, &w)) in counts.iter().zip(harvest).enumerate() {
        if !c.is_finite() || !w.is_finite() {
            return Err(Error::NonFinite(format!(
                "count or harvest of SBS {i} (count = {c}, w = {w})"
            )));
        }
    }

    let r = coverage_coefficient(params)?;
    let masked = mask_counts(counts, rho, rng);
    let u_max: Vec<f64> = states
        .iter()
        .zip(harvest)
        .map(|(st, &w)| build_u_max(st, w, r, params))
        .collect();

    let mut mu = mu_in;
    let mut u_star = vec![0.0f64; n];
    let mut iterates = options.record_iterates.then(Vec::new);
    for t in 1..=params.t_iters {
        // The local solves are independent given mu and may run
        // concurrently; the coordinator below is the only writer of mu.
        for i in 0..n {
            let noise = masked[i] - counts[i];
            let coeffs =
                slope_coeffs(&states[i], counts[i], noise, mu, harvest[i], params, r);
            u_star[i] = solve_local(&coeffs, u_max[i], options.solver)?;
        }
        let subgrad: f64 = (0..n).map(|i| coupling(u_star[i], masked[i], params, r)).sum();
        mu = multiplier_update(mu, stepsize(t, params.alpha0), subgrad);
        if let Some(trace) = iterates.as_mut() {
            trace.push(IterateRecord { t, u: u_star.clone(), mu });
        }
    }

    let mut u = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for (i, &candidate) in u_star.iter().enumerate() {
        debug_assert!(candidate >= 0.0 && candidate <= u_max[i] + 1e-12);
        if candidate <= params.u_thres {
            u.push(0.0);
            s.push(params.s_sleep);
        } else {
            u.push(candidate);
            s.push(params.s_active);
        }
    }
    Ok(ZoomDecision { u, s, mu_out: mu, masked_counts: masked, iterates })
}
