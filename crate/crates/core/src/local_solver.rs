//! Per-SBS minimization of the priced local objective.
//!
//! Setting the derivative of `f(u) + mu * g(u)` to zero and multiplying by
//! `u^{9/19}` yields the quasi-polynomial
//!
//! ```text
//! Xi(u) = p1 u^{28/19} + p2 u^{10/19} + p3 u^{9/19} - p4
//! ```
//!
//! whose sign equals the sign of the objective's slope. For `p4 > 0` the
//! profile `Xi(0+) = -p4 < 0` rising to `+infinity` crosses zero exactly
//! once — regardless of the sign of `p3`, because `Xi'(u) * u^{10/19}` is
//! strictly increasing — so the root is the unique interior minimizer and
//! [`solve_local_exact`] brackets and bisects it. For `p4 <= 0` with
//! `p3 >= 0` the slope is nonnegative everywhere and the minimum sits at
//! `u = 0`; the leftover corner (`p4 <= 0`, `p3 < 0`, reachable when heavy
//! masking noise turns the priced count negative) loses uniqueness, and the
//! solver falls back to a dense scan of the objective's antiderivative.
//!
//! [`solve_local_closed_form`] instead substitutes `chi = u^{1/19}`-style
//! scaling to collapse `Xi` into the depressed cubic
//! `p1 chi^3 + (p2 + p3) chi = p4`, solves it by Cardano's formula with real
//! cube roots, and returns `chi^2` — an approximation that provably lands
//! between `chi^{19/9}` and `chi^{19/10}`, the same bracket that pins the
//! true root.

use crate::model::{SbsState, SimParams};
use crate::{Error, Result};

/// How a per-SBS subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalSolverKind {
    /// Cardano closed form (`chi^2`), falling back to the exact solver
    /// outside its validity region.
    ClosedForm,
    /// Root bracketing on the slope equation.
    Exact,
}

/// Coefficients of the slope equation
/// `Xi(u) = p1 u^{28/19} + p2 u^{10/19} + p3 u^{9/19} - p4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeCoeffs {
    /// `2 lambda h^2 / gamma^2` — curvature of the energy quadratic.
    pub p1: f64,
    /// `20 r^2 U^2 / 19` — curvature of the association term.
    pub p2: f64,
    /// `(2 lambda h / gamma)(X_max - x - h w) + lambda h^2 (s_active^2 -
    /// s_sleep^2 + 2 s_prev / gamma)` — slope contributed by the battery gap
    /// and the mode surrogate; negative when the battery is nearly full and
    /// harvest is strong.
    pub p3: f64,
    /// `(10 r / 19)(2 U^2 + mu (U + v))` — pull toward serving users; the
    /// multiplier prices the masked count `U + v`.
    pub p4: f64,
}

/// Assembles the slope-equation coefficients for one SBS.
///
/// `count` is the true user count (it alone enters the objective terms);
/// `noise` is the masking perturbation, priced by the multiplier `mu`
/// through the coupling constraint.
pub fn slope_coeffs(
    state: &SbsState,
    count: f64,
    noise: f64,
    mu: f64,
    w: f64,
    params: &SimParams,
    r: f64,
) -> SlopeCoeffs {
    debug_assert!(mu >= 0.0);
    let h = params.h;
    let gamma = params.gamma;
    let lambda = params.lambda;
    let p1 = 2.0 * lambda * h * h / (gamma * gamma);
    let p2 = 20.0 * r * r * count * count / 19.0;
    let p3 = (2.0 * lambda * h / gamma) * (params.x_max - state.x - h * w)
        + lambda
            * h
            * h
            * (params.s_active * params.s_active - params.s_sleep * params.s_sleep
                + 2.0 * state.s_prev / gamma);
    let p4 = (10.0 * r / 19.0) * (2.0 * count * count + mu * (count + noise));
    SlopeCoeffs { p1, p2, p3, p4 }
}

impl SlopeCoeffs {
    /// `Xi(u)` evaluated through `t = u^{1/19}`, costing one `powf`.
    pub fn slope_equation(&self, u: f64) -> f64 {
        debug_assert!(u >= 0.0);
        let t = u.powf(1.0 / 19.0);
        self.p1 * t.powi(28) + self.p2 * t.powi(10) + self.p3 * t.powi(9) - self.p4
    }

    /// Antiderivative of `Xi(u) u^{-9/19}` — equal to the priced objective
    /// up to a positive scale and an additive constant, so it shares every
    /// minimizer. Used by the dense-scan fallback.
    fn potential(&self, u: f64) -> f64 {
        let t = u.powf(1.0 / 19.0);
        0.5 * self.p1 * u * u + (19.0 / 20.0) * self.p2 * t.powi(20) + self.p3 * u
            - (19.0 / 10.0) * self.p4 * t.powi(10)
    }

    fn check_finite(&self) -> Result<()> {
        if [self.p1, self.p2, self.p3, self.p4]
            .iter()
            .all(|p| p.is_finite())
        {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("coefficients {self:?}")))
        }
    }

    fn check_shape(&self) -> Result<()> {
        self.check_finite()?;
        if self.p1 > 0.0 && self.p2 >= 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "need p1 > 0 and p2 >= 0, got p1 = {}, p2 = {}",
                self.p1, self.p2
            )))
        }
    }
}

/// Exact minimizer of the priced local objective on `[0, u_max]`.
///
/// For `p4 > 0` this brackets the unique root of the slope equation and
/// bisects until `|Xi| <= 1e-10 * max(1, p4)`, then clips to the box — valid
/// because the objective strictly decreases before the root and strictly
/// increases after it. For `p4 <= 0` the minimum is `u = 0` when `p3 >= 0`;
/// otherwise a dense scan plus golden-section refinement handles the
/// (possibly bimodal) profile.
pub fn solve_local_exact(coeffs: &SlopeCoeffs, u_max: f64) -> Result<f64> {
    coeffs.check_shape()?;
    if !(u_max >= 0.0) {
        return Err(Error::Domain(format!("u_max must be >= 0, got {u_max}")));
    }
    if u_max == 0.0 {
        return Ok(0.0);
    }
    if coeffs.p4 <= 0.0 {
        if coeffs.p3 >= 0.0 {
            // Xi(u) >= -p4 >= 0: the objective never decreases.
            return Ok(0.0);
        }
        return Ok(scan_minimum(coeffs, u_max));
    }

    // Xi(0) = -p4 < 0; expand the upper end until the sign flips. The
    // p1-term alone forces Xi > 0 past (p4/p1)^{19/28}.
    let mut lo = 0.0f64;
    let mut hi = (coeffs.p4 / coeffs.p1).powf(19.0 / 28.0).max(0.5) * 2.0;
    let mut expansions = 0;
    while coeffs.slope_equation(hi) < 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NonFinite(format!(
                "root bracket failed to close for {coeffs:?}"
            )));
        }
    }
    let tol = 1e-10 * coeffs.p4.max(1.0);
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let xi = coeffs.slope_equation(mid);
        if xi.abs() <= tol {
            return Ok(mid.min(u_max));
        }
        if xi < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).min(u_max))
}

/// Cardano solution of the depressed cubic `p1 chi^3 + (p2 + p3) chi = p4`:
/// `chi = cbrt(xi + eta) + cbrt(xi - eta)` with `xi = p4 / (2 p1)` and
/// `eta = sqrt(xi^2 + (p2 + p3)^3 / (27 p1^3))`, using real cube roots.
///
/// Requires `p1 > 0`, `p2 + p3 >= 0`, `p4 > 0`, which make the cubic's
/// discriminant positive and its positive root unique.
pub fn cubic_chi(coeffs: &SlopeCoeffs) -> Result<f64> {
    coeffs.check_finite()?;
    let q = coeffs.p2 + coeffs.p3;
    if !(coeffs.p1 > 0.0 && q >= 0.0 && coeffs.p4 > 0.0) {
        return Err(Error::Domain(format!(
            "closed form needs p1 > 0, p2 + p3 >= 0, p4 > 0; got p1 = {}, p2 + p3 = {q}, p4 = {}",
            coeffs.p1, coeffs.p4
        )));
    }
    let xi = coeffs.p4 / (2.0 * coeffs.p1);
    let eta = (xi * xi + q.powi(3) / (27.0 * coeffs.p1.powi(3))).sqrt();
    Ok((xi + eta).cbrt() + (xi - eta).cbrt())
}

/// Closed-form approximate minimizer: `chi^2` clipped to `[0, u_max]`, with
/// the same `u = 0` shortcut as the exact solver when `p4 <= 0`, `p3 >= 0`.
pub fn solve_local_closed_form(coeffs: &SlopeCoeffs, u_max: f64) -> Result<f64> {
    coeffs.check_shape()?;
    if !(u_max >= 0.0) {
        return Err(Error::Domain(format!("u_max must be >= 0, got {u_max}")));
    }
    if coeffs.p4 <= 0.0 && coeffs.p3 >= 0.0 {
        return Ok(0.0);
    }
    let chi = cubic_chi(coeffs)?;
    let u_app = chi * chi;
    if u_app <= u_max {
        Ok(u_app)
    } else {
        Ok(u_max)
    }
}

/// Solves with the requested method, routing the closed form's blind spots
/// (`p2 + p3 < 0`, or `p4 <= 0` with `p3 < 0` — both reachable under heavy
/// masking noise or a nearly full battery) to the exact solver so a
/// simulation never aborts mid-run.
pub fn solve_local(coeffs: &SlopeCoeffs, u_max: f64, kind: LocalSolverKind) -> Result<f64> {
    match kind {
        LocalSolverKind::Exact => solve_local_exact(coeffs, u_max),
        LocalSolverKind::ClosedForm => match solve_local_closed_form(coeffs, u_max) {
            Err(Error::Domain(_)) => solve_local_exact(coeffs, u_max),
            other => other,
        },
    }
}

/// Dense scan of the potential on `[0, u_max]` followed by golden-section
/// refinement of the best cell. Only reached in the non-unique corner, so
/// the grid is sized for robustness (1e4 points) rather than speed.
fn scan_minimum(coeffs: &SlopeCoeffs, u_max: f64) -> f64 {
    const POINTS: usize = 10_000;
    let step = u_max / POINTS as f64;
    let mut best = (coeffs.potential(0.0), 0usize);
    for j in 1..=POINTS {
        let value = coeffs.potential(step * j as f64);
        if value < best.0 {
            best = (value, j);
        }
    }
    let lo = step * best.1.saturating_sub(1) as f64;
    let hi = (step * (best.1 + 1) as f64).min(u_max);
    let refined = golden_min(|u| coeffs.potential(u), lo, hi, 1e-8);
    // Golden-section lands strictly inside its bracket; with the power
    // term's infinite slope at zero (and a possibly descending edge at
    // u_max) the true minimizer can be an endpoint, so pick the best of
    // all candidates explicitly.
    let mut winner = (best.0, step * best.1 as f64);
    for cand in [refined, 0.0, u_max] {
        let value = coeffs.potential(cand);
        if value < winner.0 {
            winner = (value, cand);
        }
    }
    winner.1
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
