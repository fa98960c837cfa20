//! Separable reformulation of the network-wide scheduling problem.
//!
//! The exact objective couples the SBSs only through the shared user budget
//! of the macro cell, but its battery term hides two non-convexities: the
//! saturation clamp and the 0/1 mode indicator inside the system power.
//! This module applies the standard three-step relaxation:
//!
//! 1. replace the saturation by the box bound `u_max` that keeps the battery
//!    nonnegative in active mode,
//! 2. substitute the previous step's system power into the cross term of the
//!    energy quadratic, and
//! 3. swap the mode indicator for its l1 surrogate, which lands in the
//!    linear-in-`u` coefficient.
//!
//! What remains per SBS is the strictly convex [`local_objective`] on
//! `[0, u_max]` plus the monotone [`coupling`] that the coordinator prices
//! with a single multiplier.

use crate::model::{users_served, SbsState, SimParams};

/// Upper bound on the transmission power of an active SBS:
/// `max{0, min{r^{-19/10}, gamma * (x/h + w - s_active)}}`.
///
/// The first branch is where association saturates the local user count;
/// the second is where one step of active-mode draw would deplete the
/// battery. A battery that cannot sustain active mode at all yields 0.
pub fn build_u_max(state: &SbsState, w: f64, r: f64, params: &SimParams) -> f64 {
    let depletion = params.gamma * (state.x / params.h + w - params.s_active);
    let full_assoc = r.powf(-1.9);
    full_assoc.min(depletion).max(0.0)
}

/// Linear-in-`u` coefficient produced by the mode-indicator surrogate and
/// the previous-power substitution:
/// `lambda * h^2 * (s_active^2 - s_sleep^2 + 2 * s_prev / gamma)`.
fn linear_coefficient(state: &SbsState, params: &SimParams) -> f64 {
    params.lambda
        * params.h
        * params.h
        * (params.s_active * params.s_active - params.s_sleep * params.s_sleep
            + 2.0 * state.s_prev / params.gamma)
}

/// Per-SBS objective of the separable problem:
/// `(U - F(u,U))^2 + lambda (X_max - x - h w + h u / gamma)^2 + linear * u`.
///
/// `count` may be privacy-masked and hence negative; the association term
/// squares it, and the solver layers deal with the sign.
pub fn local_objective(
    u: f64,
    count: f64,
    state: &SbsState,
    w: f64,
    params: &SimParams,
    r: f64,
) -> f64 {
    debug_assert!(u >= 0.0);
    let assoc = count - users_served(u, count, r);
    let energy = params.x_max - state.x - params.h * w + params.h * u / params.gamma;
    assoc * assoc + params.lambda * energy * energy + linear_coefficient(state, params) * u
}

/// Per-SBS share of the macro-cell load constraint:
/// `g(u, U) = U - F(u, U) - (1 - c) * U_macro / N`.
///
/// Positive values mean this SBS still hands users to the macro cell beyond
/// its fair share; the sum over SBSs being nonpositive is the relaxed
/// full-accommodation constraint.
pub fn coupling(u: f64, count: f64, params: &SimParams, r: f64) -> f64 {
    debug_assert!(u >= 0.0);
    count - users_served(u, count, r) - g_offset(params)
}

/// The constant `(1 - c) * U_macro / N` subtracted by [`coupling`].
pub fn g_offset(params: &SimParams) -> f64 {
    (1.0 - params.c) * params.u_macro / params.n as f64
}

/// One SBS's separable subproblem with every coefficient precomputed, so the
/// solver's inner loops touch no parameter structs.
#[derive(Debug, Clone, Copy)]
pub struct LocalProblem {
    /// Box bound on the transmission power (W).
    pub u_max: f64,
    /// User count in the cell, possibly masked (may be negative).
    pub count: f64,
    /// Coverage coefficient.
    pub r: f64,
    /// `X_max - x - h w`: distance of the pre-drain battery from full (J).
    pub energy_gap: f64,
    /// `h / gamma`: joules drained per watt of transmission power.
    pub drain: f64,
    /// Weight of the energy quadratic.
    pub lambda: f64,
    /// Coefficient of the linear term.
    pub linear: f64,
    /// `(1 - c) * U_macro / N`.
    pub g_offset: f64,
}

impl LocalProblem {
    /// Assembles the subproblem for one SBS at one timestep.
    pub fn new(state: &SbsState, w: f64, count: f64, params: &SimParams, r: f64) -> Self {
        let problem = LocalProblem {
            u_max: build_u_max(state, w, r, params),
            count,
            r,
            energy_gap: params.x_max - state.x - params.h * w,
            drain: params.h / params.gamma,
            lambda: params.lambda,
            linear: linear_coefficient(state, params),
            g_offset: g_offset(params),
        };
        debug_assert!(problem.u_max >= 0.0);
        debug_assert!(problem.g_offset > 0.0);
        debug_assert!(problem.linear >= 0.0);
        problem
    }

    /// [`local_objective`] evaluated from the precomputed coefficients.
    pub fn objective(&self, u: f64) -> f64 {
        let assoc = self.count - users_served(u, self.count, self.r);
        let energy = self.energy_gap + self.drain * u;
        assoc * assoc + self.lambda * energy * energy + self.linear * u
    }

    /// [`coupling`] evaluated from the precomputed coefficients.
    pub fn coupling(&self, u: f64) -> f64 {
        self.count - users_served(u, self.count, self.r) - self.g_offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{coverage_coefficient, sat};

    const R: f64 = 0.41447411030349662;

    fn params() -> SimParams {
        SimParams::reference()
    }

    fn state(x: f64) -> SbsState {
        SbsState { x, s_prev: 0.5 }
    }

    #[test]
    fn u_max_branches() {
        let p = params();
        // Healthy battery: the association cap r^{-19/10} binds.
        let healthy = build_u_max(&state(30_000.0), 0.0, R, &p);
        assert!(
            (healthy - 5.3303401609165716).abs() < 1e-12,
            "got {healthy}"
        );
        // Depleted battery: active mode is unaffordable.
        assert_eq!(build_u_max(&state(0.0), 1.0, R, &p), 0.0);
        // Thin battery: the depletion bound binds.
        let thin = build_u_max(&state(300.0), 1.0, R, &p);
        assert!((thin - 0.16).abs() < 1e-12, "got {thin}");
    }

    #[test]
    fn u_max_uses_current_coverage() {
        let p = params();
        let r = coverage_coefficient(&p).unwrap();
        let v = build_u_max(&state(30_000.0), 0.0, r, &p);
        assert!((v - r.powf(-1.9)).abs() < 1e-12);
    }

    #[test]
    fn objective_at_zero_power() {
        let p = params();
        // X_max - x - h w = 40000 - 33000 - 0 = 7000.
        let v = local_objective(0.0, 60.0, &state(33_000.0), 0.0, &p, R);
        assert!((v - 6_050.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn objective_association_term_vanishes_at_full_service() {
        let p = params();
        let u = R.powf(-1.9);
        let st = state(33_000.0);
        let v = local_objective(u, 60.0, &st, 0.0, &p, R);
        let energy = p.x_max - st.x + p.h * u / p.gamma;
        let rest = p.lambda * energy * energy
            + p.lambda * p.h * p.h * (1.5f64 * 1.5 - 0.25 + 2.0 * 0.5 / 0.32) * u;
        assert!((v - rest).abs() < 1e-9 * rest, "v = {v}, rest = {rest}");
    }

    #[test]
    fn objective_weight_zero_degeneracy() {
        let mut p = params();
        p.lambda = 0.0;
        let st = state(10_000.0);
        for &u in &[0.0, 0.3, 1.7, 4.0] {
            let v = local_objective(u, 80.0, &st, 2.0, &p, R);
            let assoc = 80.0 - users_served(u, 80.0, R);
            assert_eq!(v, assoc * assoc);
        }
    }

    #[test]
    fn coupling_anchors() {
        let p = params();
        let g0 = coupling(0.0, 60.0, &p, R);
        assert!((g0 - 26.25).abs() < 1e-12, "got {g0}");
        let g_full = coupling(R.powf(-1.9), 60.0, &p, R);
        assert!((g_full + 33.75).abs() < 1e-8, "got {g_full}");
    }

    #[test]
    fn coupling_with_unit_margin_forces_exact_service() {
        let mut p = params();
        p.c = 0.999_999_999; // c = 1 is excluded by validation; approach it
        let g = coupling(1.0, 60.0, &p, R);
        let direct = 60.0 - users_served(1.0, 60.0, R);
        assert!((g - direct).abs() < 1e-6);
    }

    #[test]
    fn problem_matches_free_functions() {
        let p = params();
        let st = state(21_000.0);
        let problem = LocalProblem::new(&st, 1.3, 72.0, &p, R);
        for &u in &[0.0, 0.1, 0.9, 2.5, problem.u_max] {
            let direct = local_objective(u, 72.0, &st, 1.3, &p, R);
            assert!((problem.objective(u) - direct).abs() <= 1e-9 * direct.abs().max(1.0));
            let g_direct = coupling(u, 72.0, &p, R);
            assert!((problem.coupling(u) - g_direct).abs() < 1e-12);
        }
    }

    /// With equal active and sleep powers the relaxation's derivative matches
    /// the exact objective's exactly (their difference is u-independent), so
    /// grid argmins must coincide.
    #[test]
    fn argmin_agrees_with_exact_term_when_powers_equal() {
        let mut p = params();
        p.s_active = 1.5;
        p.s_sleep = 1.5;
        let st = SbsState { x: 20_000.0, s_prev: 1.5 };
        for (w, count) in [(0.0, 40.0), (1.5, 90.0), (3.0, 140.0)] {
            let u_hi = build_u_max(&st, w, R, &p);
            let grid = 2_000usize;
            let mut best_f = (f64::INFINITY, 0usize);
            let mut best_exact = (f64::INFINITY, 0usize);
            for j in 0..=grid {
                let u = u_hi * j as f64 / grid as f64;
                let f = local_objective(u, count, &st, w, &p, R);
                // Exact active-mode term of the network objective.
                let next = sat(st.x + p.h * (w - u / p.gamma - p.s_active), p.x_max);
                let assoc = count - users_served(u, count, R);
                let exact = assoc * assoc + p.lambda * (p.x_max - next) * (p.x_max - next);
                if f < best_f.0 {
                    best_f = (f, j);
                }
                if exact < best_exact.0 {
                    best_exact = (exact, j);
                }
            }
            let gap = best_f.1.abs_diff(best_exact.1);
            assert!(gap <= 1, "argmins {} vs {} (w={w})", best_f.1, best_exact.1);
        }
    }
}
