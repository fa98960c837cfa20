//! Physical and association model of one off-grid small-cell base station.
//!
//! An SBS is a battery plus a radio. The battery integrates harvested power
//! minus the amplifier draw `u/gamma` and the mode-dependent system power
//! `s`, saturating at `[0, X_max]`. The radio associates users according to
//! `F(u, U) = r * U * u^{10/19}`, where the coverage coefficient `r` collapses
//! the QoE target, packet size, noise floor, and path-loss factor into one
//! number via the error-function chain implemented in [`crate::erf`].
//!
//! Everything here is a pure function in strict SI units (J, W, s). Values
//! quoted in kJ or dBm by configuration are converted before they arrive.

use crate::erf::erfc;
use crate::{Error, Result};
use std::f64::consts::PI;

/// Exponent of the association law `F(u, U) = r * U * u^{10/19}`.
pub const ASSOCIATION_EXP: f64 = 10.0 / 19.0;

/// Smallest admissible QoE target: below `1.065 + 3.01 e^{-4.473}` the
/// bit-error-rate formula takes the logarithm of a nonpositive number.
pub fn min_qoe() -> f64 {
    1.065 + 3.01 * (-4.473f64).exp()
}

// ---------------------------------------------------------------------------
// parameter bundles
// ---------------------------------------------------------------------------

/// All physical and algorithmic constants of one simulation, immutable per
/// run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Number of SBSs.
    pub n: usize,
    /// Coverage area of one cell (km^2).
    pub area_km2: f64,
    /// Battery capacity (J).
    pub x_max: f64,
    /// Initial residual energy of every battery at k = 0 (J).
    pub x0: f64,
    /// Power-amplifier efficiency, in (0, 1].
    pub gamma: f64,
    /// Sampling period (s).
    pub h: f64,
    /// User capacity of the macro base station.
    pub u_macro: f64,
    /// System power in active mode (W).
    pub s_active: f64,
    /// System power in sleep mode (W).
    pub s_sleep: f64,
    /// System noise (dBm).
    pub sigma_dbm: f64,
    /// Path-loss factor (dBm).
    pub z_dbm: f64,
    /// Quality-of-experience target (dimensionless).
    pub q: f64,
    /// Packet size (bit).
    pub s_bit: f64,
    /// Weight of the stored-energy term in the objective.
    pub lambda: f64,
    /// Full-accommodation margin, in [0, 1).
    pub c: f64,
    /// Transmission powers at or below this threshold are reset to zero (W).
    pub u_thres: f64,
    /// Terminal step of the per-timestep coordination loop.
    pub t_iters: u32,
    /// Stepsize numerator: iteration t uses stepsize `alpha0 / t`.
    pub alpha0: f64,
}

impl SimParams {
    /// The reference four-cell configuration used throughout the experiment
    /// suite: 40 kJ batteries starting at 30 kJ, 300 s sampling, a 150-user
    /// macro cell, and the radio constants that yield r of roughly 0.414.
    pub fn reference() -> Self {
        SimParams {
            n: 4,
            area_km2: 0.16 * PI,
            x_max: 40_000.0,
            x0: 30_000.0,
            gamma: 0.32,
            h: 300.0,
            u_macro: 150.0,
            s_active: 1.5,
            s_sleep: 0.5,
            sigma_dbm: -138.8,
            z_dbm: 161.8296,
            q: 4.0,
            s_bit: 12_000.0,
            lambda: 5e-5,
            c: 0.1,
            u_thres: 0.1,
            t_iters: 20,
            alpha0: 7.0,
        }
    }

    /// Checks every documented invariant, returning `self` on success so the
    /// call chains after struct-literal construction.
    pub fn validated(self) -> Result<Self> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")))
            }
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be >= 1".into()));
        }
        positive("area_km2", self.area_km2)?;
        positive("x_max", self.x_max)?;
        positive("h", self.h)?;
        positive("u_macro", self.u_macro)?;
        positive("s_active", self.s_active)?;
        positive("s_sleep", self.s_sleep)?;
        positive("s_bit", self.s_bit)?;
        positive("u_thres", self.u_thres)?;
        positive("alpha0", self.alpha0)?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.s_active <= self.s_sleep {
            return Err(Error::InvalidParams(format!(
                "s_active ({}) must exceed s_sleep ({})",
                self.s_active, self.s_sleep
            )));
        }
        if !(self.c >= 0.0 && self.c < 1.0) {
            return Err(Error::InvalidParams(format!(
                "c must be in [0, 1), got {}",
                self.c
            )));
        }
        if !(self.q > min_qoe()) {
            return Err(Error::InvalidParams(format!(
                "q must exceed {}, got {}",
                min_qoe(),
                self.q
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.x0 >= 0.0 && self.x0 <= self.x_max) {
            return Err(Error::InvalidParams(format!(
                "x0 must lie in [0, x_max], got {}",
                self.x0
            )));
        }
        if self.t_iters == 0 {
            return Err(Error::InvalidParams("t_iters must be >= 1".into()));
        }
        if !self.sigma_dbm.is_finite() || !self.z_dbm.is_finite() {
            return Err(Error::InvalidParams(
                "sigma_dbm and z_dbm must be finite".into(),
            ));
        }
        Ok(self)
    }
}

/// Dynamic state of one SBS between timesteps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbsState {
    /// Residual battery energy (J), in [0, X_max].
    pub x: f64,
    /// System power drawn at the previous step (W), either `s_active` or
    /// `s_sleep`.
    pub s_prev: f64,
}

impl SbsState {
    /// Builds a state and checks its invariants against `params`.
    pub fn new(x: f64, s_prev: f64, params: &SimParams) -> Result<Self> {
        if !(x >= 0.0 && x <= params.x_max) {
            return Err(Error::InvalidParams(format!(
                "residual energy {x} outside [0, {}]",
                params.x_max
            )));
        }
        if s_prev != params.s_active && s_prev != params.s_sleep {
            return Err(Error::InvalidParams(format!(
                "s_prev {s_prev} is neither s_active nor s_sleep"
            )));
        }
        Ok(SbsState { x, s_prev })
    }
}

// ---------------------------------------------------------------------------
// radio model
// ---------------------------------------------------------------------------

/// Bit error rate that meets the QoE target `q` at packet size `s_bit`:
/// `1 - exp((1/S) ln(1 + (1/4.473) ln((Q - 1.065)/3.01)))`.
///
/// The value is the raw formula output; for `q` above roughly 4.075 the
/// formula turns negative, which downstream consumers reject at the
/// `inv_erfc` domain check.
pub fn ber(q: f64, s_bit: f64) -> Result<f64> {
    if !(s_bit.is_finite() && s_bit > 0.0) {
        return Err(Error::Domain(format!("packet size must be > 0, got {s_bit}")));
    }
    let inner = (q - 1.065) / 3.01;
    if !(inner > 0.0) {
        return Err(Error::Domain(format!(
            "QoE target {q} makes (q - 1.065)/3.01 nonpositive"
        )));
    }
    let t = inner.ln() / 4.473;
    if !(t > -1.0) {
        return Err(Error::Domain(format!(
            "QoE target {q} drives the outer logarithm out of domain"
        )));
    }
    // ln_1p/exp_m1 keep full relative precision: the plain 1 - exp(...)
    // form loses ten digits to cancellation at realistic packet sizes.
    Ok(-(t.ln_1p() / s_bit).exp_m1())
}

/// Inverse complementary error function: the `x` with `erfc(x) = y`.
///
/// `y` must lie in (0, 2); the result is negative for `y > 1`. Bracketed
/// bisection on [`crate::erf::erfc`] down to floating-point exhaustion, which
/// leaves `erfc(x)` within a relative 1e-12 of `y` wherever `y` is large
/// enough for erfc's output to carry that precision (above roughly 1e-300;
/// in the subnormal tail the result is still the best representable inverse).
pub fn inv_erfc(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 2.0) {
        return Err(Error::Domain(format!("inv_erfc argument {y} outside (0, 2)")));
    }
    if y == 1.0 {
        return Ok(0.0);
    }
    if y > 1.0 {
        // The subtraction is exact for y in [1, 2].
        return Ok(-inv_erfc(2.0 - y)?);
    }
    // Expand the bracket until erfc(hi) <= y < erfc(lo) = 1; erfc underflows
    // to zero near x = 27.3, so the expansion always terminates by hi = 32.
    let mut hi = 1.0f64;
    while erfc(hi) > y {
        hi *= 2.0;
    }
    let mut lo = 0.0f64;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if erfc(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Association coefficient `r` from the radio constants:
/// `b = -(1/19) ((5/2) inv_erfc((8/3) BER)^2 + sigma + Z)` and
/// `r = pi * 10^{b + 30/19} / A`.
pub fn coverage_coefficient(params: &SimParams) -> Result<f64> {
    let bit_err = ber(params.q, params.s_bit)?;
    let inv = inv_erfc(8.0 / 3.0 * bit_err)?;
    let b = -(2.5 * inv * inv + params.sigma_dbm + params.z_dbm) / 19.0;
    let r = PI * 10f64.powf(b + 30.0 / 19.0) / params.area_km2;
    if !r.is_finite() {
        return Err(Error::NonFinite(format!(
            "coverage coefficient overflowed (b = {b})"
        )));
    }
    Ok(r)
}

/// Users associated with an SBS transmitting at `u` W when `count` users are
/// in its area: `F(u, count) = r * count * u^{10/19}`.
///
/// The formula is applied verbatim; privacy-masked counts may be negative,
/// in which case the (negative) formula value is exactly what the noisy
/// constraint algebra calls for.
pub fn users_served(u: f64, count: f64, r: f64) -> f64 {
    debug_assert!(u >= 0.0, "transmission power must be nonnegative");
    if u == 0.0 {
        return 0.0;
    }
    r * count * u.powf(ASSOCIATION_EXP)
}

/// Battery saturation: clamps `x` to `[0, x_max]`.
pub fn sat(x: f64, x_max: f64) -> f64 {
    debug_assert!(x_max > 0.0);
    x.clamp(0.0, x_max)
}

/// Advances one battery by one sampling period:
/// `sat(x + h (w - u/gamma - s), X_max)`.
///
/// `s` must be exactly `s_active` or `s_sleep`, and the mode must be
/// consistent with the power: `u = 0` iff `s = s_sleep`. When the two
/// system powers coincide (a degenerate but legal sweep configuration)
/// the mode cannot be inferred from `s`, so only the first check applies.
pub fn battery_step(
    state: &SbsState,
    w: f64,
    u: f64,
    s: f64,
    params: &SimParams,
) -> Result<f64> {
    if !(u.is_finite() && u >= 0.0 && w.is_finite()) {
        return Err(Error::NonFinite(format!(
            "battery_step inputs must be finite with u >= 0 (u = {u}, w = {w})"
        )));
    }
    if s != params.s_active && s != params.s_sleep {
        return Err(Error::Domain(format!(
            "system power {s} is neither s_active nor s_sleep"
        )));
    }
    if params.s_active != params.s_sleep && (u == 0.0) != (s == params.s_sleep) {
        return Err(Error::Domain(format!(
            "inconsistent mode: u = {u} with s = {s}"
        )));
    }
    Ok(sat(
        state.x + params.h * (w - u / params.gamma - s),
        params.x_max,
    ))
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
