//! Laplace count masking and the confidentiality-accuracy budget.
//!
//! Each SBS reports its user count plus zero-mean Laplace noise of scale
//! `rho = delta / epsilon`, the standard mechanism for `epsilon`-differential
//! privacy under `delta`-adjacency. The coordinator's constraint then sees
//! the noise sum `v_1 + ... + v_N`, and the design question is how large a
//! scale keeps `P(|sum| > Lambda)` below a tolerance `zeta`.
//!
//! The tail is bounded by `2 psi_N(Lambda / rho)` where
//!
//! ```text
//! psi_N(y) = y^{2N} e^{N - s} / ((2N)^N (s - N)^N),   s = sqrt(y^2 + N^2)
//! ```
//!
//! Taking logarithms collapses this dramatically: with the exact conjugate
//! `d = s - N = y^2 / (s + N)`, the `y^{2N}` and `(s - N)^N` powers cancel
//! into `ln psi = -d + N ln(1 + d / (2N))` — no large exponents, no
//! cancellation at either end of the range. [`max_ratio_proposed`] inverts
//! the bound for the largest admissible `delta / epsilon`; the Bernstein
//! alternative [`max_ratio_bernstein`] is cheaper but visibly more
//! conservative, which [`empirical_tail`] lets a test confirm by Monte
//! Carlo.

use crate::{Error, Result};
use rand::Rng;

/// Which tail condition sizes the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    /// Inversion of the exact tail bound `2 psi_N < zeta`.
    Proposed,
    /// Bernstein-type sufficient condition.
    Bernstein,
}

/// A complete masking configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    /// Differential-privacy level.
    pub epsilon: f64,
    /// Adjacency width: the largest per-cell count difference hidden (users).
    pub delta: f64,
    /// Laplace scale, exactly `delta / epsilon`.
    pub rho: f64,
    /// Tolerated perturbation of the summed constraint (users).
    pub lambda: f64,
    /// Bound on the probability of exceeding `lambda`.
    pub zeta: f64,
    /// Condition used to certify the budget.
    pub method: BoundMethod,
}

impl PrivacyBudget {
    /// Builds a budget, deriving `rho` and validating positivity.
    pub fn new(
        epsilon: f64,
        delta: f64,
        lambda: f64,
        zeta: f64,
        method: BoundMethod,
    ) -> Result<Self> {
        for (name, v) in [
            ("epsilon", epsilon),
            ("delta", delta),
            ("lambda", lambda),
            ("zeta", zeta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "privacy budget field {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(PrivacyBudget {
            epsilon,
            delta,
            rho: delta / epsilon,
            lambda,
            zeta,
            method,
        })
    }

    /// Whether this budget's noise scale stays within the chosen condition
    /// for `n` reporting cells.
    pub fn admissible(&self, n: u32) -> Result<bool> {
        let cap = match self.method {
            BoundMethod::Proposed => max_ratio_proposed(n, self.lambda, self.zeta)?,
            BoundMethod::Bernstein => max_ratio_bernstein(n, self.lambda, self.zeta)?,
        };
        Ok(self.rho <= cap)
    }
}

/// One draw from the zero-mean Laplace distribution of scale `rho`, by
/// inverse-CDF: `-rho * sign(p - 1/2) * ln(1 - 2|p - 1/2|)`.
///
/// `rho = 0` returns 0 without consuming randomness, so noiseless runs are
/// bit-identical whether or not a masking stage is wired in.
pub fn sample_laplace(rho: f64, rng: &mut impl Rng) -> f64 {
    debug_assert!(rho >= 0.0);
    if rho == 0.0 {
        return 0.0;
    }
    // p = 0 would push the inverse CDF to -infinity; redraw (probability
    // 2^-53 per draw).
    let p: f64 = loop {
        let candidate = rng.gen::<f64>();
        if candidate > 0.0 {
            break candidate;
        }
    };
    let centered = p - 0.5;
    -rho * centered.signum() * (1.0 - 2.0 * centered.abs()).ln_1p_negated()
}

/// Helper trait so the Laplace inverse CDF can spell `ln(1 - z)` stably.
trait Ln1pNegated {
    fn ln_1p_negated(self) -> f64;
}

impl Ln1pNegated for f64 {
    /// `ln(self)` written as `ln_1p(self - 1)`: exact for arguments near 1,
    /// which is where `1 - 2|p - 1/2|` lands for small noise.
    fn ln_1p_negated(self) -> f64 {
        (self - 1.0).ln_1p()
    }
}

/// The tail kernel `psi_N(y)`, strictly decreasing from 1 (as `y -> 0`)
/// toward 0, evaluated in log-space.
pub fn psi(n: u32, y: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("psi requires n >= 1".into()));
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!("psi requires y > 0, got {y}")));
    }
    let nf = n as f64;
    let s = (y * y + nf * nf).sqrt();
    // Exact conjugate form of s - N: no cancellation as y -> 0.
    let d = y * y / (s + nf);
    Ok((-d + nf * (d / (2.0 * nf)).ln_1p()).exp())
}

/// Largest admissible `delta / epsilon` under the exact tail condition
/// `2 psi_N(Lambda / rho) < zeta`: bisects `2 psi_N(y*) = zeta` (possible
/// because `psi_N` decreases strictly from 1) and returns `Lambda / y*`.
pub fn max_ratio_proposed(n: u32, lambda: f64, zeta: f64) -> Result<f64> {
    check_budget_args(n, lambda, zeta)?;
    if zeta >= 2.0 {
        return Err(Error::Domain(format!(
            "tail tolerance zeta = {zeta} is vacuous: 2 psi_N < 2 everywhere"
        )));
    }
    // Expand until the condition holds at hi.
    let mut hi = 1e-6f64;
    while 2.0 * psi(n, hi)? >= zeta {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::NonFinite(format!(
                "tail condition 2 psi_{n} < {zeta} unreachable"
            )));
        }
    }
    let mut lo = 0.0f64; // 2 psi_N(0+) = 2 > zeta by construction
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if 2.0 * psi(n, mid)? >= zeta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lambda / (0.5 * (lo + hi)))
}

/// Largest admissible `delta / epsilon` under the Bernstein-type condition:
/// `Lambda / (4 ln(2/zeta))` for `N <= 2 ln(2/zeta)`, else
/// `Lambda / (2 sqrt(2 N ln(2/zeta)))`.
pub fn max_ratio_bernstein(n: u32, lambda: f64, zeta: f64) -> Result<f64> {
    check_budget_args(n, lambda, zeta)?;
    if zeta >= 2.0 {
        return Err(Error::Domain(format!(
            "tail tolerance zeta = {zeta} makes ln(2/zeta) nonpositive"
        )));
    }
    let log_term = (2.0 / zeta).ln();
    let nf = n as f64;
    if nf <= 2.0 * log_term {
        Ok(lambda / (4.0 * log_term))
    } else {
        Ok(lambda / (2.0 * (2.0 * nf * log_term).sqrt()))
    }
}

fn check_budget_args(n: u32, lambda: f64, zeta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("need n >= 1".into()));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("need lambda > 0, got {lambda}")));
    }
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(Error::Domain(format!("need zeta > 0, got {zeta}")));
    }
    Ok(())
}

/// Monte Carlo estimate of `P(|v_1 + ... + v_n| > lambda)` for i.i.d.
/// Laplace noise of scale `rho`.
///
/// Statistical accuracy needs on the order of 1e4 samples or more; the
/// count is the caller's choice.
pub fn empirical_tail(n: u32, rho: f64, lambda: f64, samples: usize, rng: &mut impl Rng) -> f64 {
    debug_assert!(n >= 1);
    debug_assert!(samples > 0);
    let mut exceeded = 0usize;
    for _ in 0..samples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sample_laplace(rho, rng);
        }
        if sum.abs() > lambda {
            exceeded += 1;
        }
    }
    exceeded as f64 / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laplace_degenerate_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(sample_laplace(0.0, &mut rng), 0.0);
        }
    }

    #[test]
    fn laplace_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let rho = 10.0;
        let samples: Vec<f64> = (0..n).map(|_| sample_laplace(rho, &mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.2, "sample mean {mean}");
        // Laplace variance is 2 rho^2 = 200.
        assert!((var - 200.0).abs() < 10.0, "sample variance {var}");
    }

    #[test]
    fn laplace_cdf_matches_analytic() {
        // Kolmogorov-Smirnov style max deviation between the empirical CDF
        // and F(x) = 1/2 e^{x/rho} (x < 0), 1 - 1/2 e^{-x/rho} (x >= 0).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = 10.0;
        let n = 100_000usize;
        let mut samples: Vec<f64> = (0..n).map(|_| sample_laplace(rho, &mut rng)).collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = |x: f64| {
            if x < 0.0 {
                0.5 * (x / rho).exp()
            } else {
                1.0 - 0.5 * (-x / rho).exp()
            }
        };
        let mut dev = 0.0f64;
        for (i, &x) in samples.iter().enumerate() {
            let empirical_hi = (i + 1) as f64 / n as f64;
            let empirical_lo = i as f64 / n as f64;
            let f = cdf(x);
            dev = dev.max((empirical_hi - f).abs()).max((f - empirical_lo).abs());
        }
        assert!(dev < 0.01, "KS deviation {dev}");
    }

    #[test]
    fn laplace_median_maps_to_zero() {
        // The inverse CDF sends p = 1/2 to exactly 0; feed a mock stream.
        struct Half;
        impl rand::RngCore for Half {
            fn next_u32(&mut self) -> u32 {
                unimplemented!()
            }
            fn next_u64(&mut self) -> u64 {
                // gen::<f64>() consumes the top 53 bits: this yields 0.5.
                1 << 63
            }
            fn fill_bytes(&mut self, _: &mut [u8]) {
                unimplemented!()
            }
            fn try_fill_bytes(&mut self, _: &mut [u8]) -> std::result::Result<(), rand::Error> {
                unimplemented!()
            }
        }
        assert_eq!(sample_laplace(5.0, &mut Half), 0.0);
    }

    #[test]
    fn psi_anchors() {
        // Analytic limit psi -> 1 as y -> 0.
        let near_one = psi(1, 1e-4).unwrap();
        assert!((near_one - 1.0).abs() < 1e-6, "psi_1(1e-4) = {near_one}");
        assert!(
            (near_one - 0.99999999750000001).abs() < 1e-12,
            "psi_1(1e-4) = {near_one}"
        );
        let v = psi(1, 3.0).unwrap();
        assert!((v - 0.23946155382996716).abs() < 1e-12, "psi_1(3) = {v}");
        let v = psi(4, 12.0).unwrap();
        assert!(
            (v - 0.0032880861286321325).abs() < 1e-15,
            "psi_4(12) = {v}"
        );
    }

    #[test]
    fn psi_domain() {
        assert!(psi(0, 1.0).is_err());
        assert!(psi(1, 0.0).is_err());
        assert!(psi(1, -2.0).is_err());
        assert!(psi(1, f64::INFINITY).is_err());
    }

    #[test]
    fn psi_strictly_decreasing() {
        for n in [1u32, 2, 4, 8, 16] {
            let mut prev = psi(n, 1e-3).unwrap();
            for j in 1..=200 {
                let y = 1e-3 * 10f64.powf(5.0 * j as f64 / 200.0);
                let cur = psi(n, y).unwrap();
                assert!(cur < prev, "psi_{n} not decreasing at y = {y}");
                prev = cur;
            }
        }
    }

    #[test]
    fn proposed_ratio_reference() {
        let ratio = max_ratio_proposed(4, 30.0, 0.01).unwrap();
        assert!(
            (ratio - 2.6283884916850477).abs() < 1e-6,
            "got {ratio}"
        );
        // y* itself: 2 psi_4(y*) = 0.01.
        let y_star = 30.0 / ratio;
        assert!((y_star - 11.413837830634823).abs() < 1e-6);
        let check = 2.0 * psi(4, y_star).unwrap();
        assert!((check - 0.01).abs() < 1e-9, "2 psi at root = {check}");
    }

    #[test]
    fn proposed_ratio_scales_linearly_in_lambda() {
        let one = max_ratio_proposed(4, 30.0, 0.01).unwrap();
        let two = max_ratio_proposed(4, 60.0, 0.01).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-9 * one);
    }

    #[test]
    fn proposed_ratio_shrinks_with_zeta() {
        let mut prev = max_ratio_proposed(4, 30.0, 0.5).unwrap();
        for zeta in [0.1, 0.01, 1e-3, 1e-4] {
            let cur = max_ratio_proposed(4, 30.0, zeta).unwrap();
            assert!(cur < prev, "ratio not shrinking at zeta = {zeta}");
            prev = cur;
        }
    }

    #[test]
    fn proposed_ratio_rejects_vacuous_zeta() {
        assert!(max_ratio_proposed(4, 30.0, 2.0).is_err());
        assert!(max_ratio_proposed(4, 30.0, 2.5).is_err());
        // Just below the supremum is solvable (y* is tiny but positive).
        assert!(max_ratio_proposed(4, 30.0, 1.999).is_ok());
    }

    #[test]
    fn bernstein_reference_values() {
        // N = 4 <= 2 ln 200 = 10.597: first branch, 30 / (4 ln 200).
        let v = max_ratio_bernstein(4, 30.0, 0.01).unwrap();
        assert!((v - 1.4155437436354863).abs() < 1e-9, "got {v}");
        // N = 100: second branch, 30 / (2 sqrt(200 ln 200)).
        let v = max_ratio_bernstein(100, 30.0, 0.01).unwrap();
        assert!((v - 0.4607944894906776).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn bernstein_branches_meet_at_boundary() {
        // At N = 2 ln(2/zeta) both expressions equal Lambda/(4 ln(2/zeta)).
        let zeta = 0.01f64;
        let log_term = (2.0 / zeta).ln();
        let lambda = 30.0;
        let first = lambda / (4.0 * log_term);
        let second = lambda / (2.0 * (2.0 * (2.0 * log_term) * log_term).sqrt());
        assert!((first - second).abs() < 1e-12 * first);
    }

    #[test]
    fn proposed_beats_bernstein_for_small_networks() {
        for n in 2..=16u32 {
            let proposed = max_ratio_proposed(n, 30.0, 0.01).unwrap();
            let bernstein = max_ratio_bernstein(n, 30.0, 0.01).unwrap();
            assert!(
                proposed > bernstein,
                "n = {n}: proposed {proposed} vs bernstein {bernstein}"
            );
        }
    }

    #[test]
    fn empirical_tail_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(empirical_tail(4, 0.0, 5.0, 10_000, &mut rng), 0.0);
        let always = empirical_tail(4, 2.0, 0.0, 10_000, &mut rng);
        assert!(always > 0.999, "P(|sum| > 0) = {always}");
    }

    #[test]
    fn empirical_tail_below_certified_bound() {
        // At the proposed condition's boundary the real tail must sit below
        // zeta (the bound is valid, just not tight).
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let zeta = 0.01;
        let ratio = max_ratio_proposed(4, 30.0, zeta).unwrap();
        let estimate = empirical_tail(4, ratio, 30.0, 200_000, &mut rng);
        assert!(estimate < zeta, "tail estimate {estimate} >= {zeta}");
    }

    #[test]
    fn budget_construction_and_admissibility() {
        let budget = PrivacyBudget::new(1.0, 2.0, 30.0, 0.01, BoundMethod::Proposed).unwrap();
        assert_eq!(budget.rho, 2.0);
        assert!(budget.admissible(4).unwrap());
        // rho = 2.8 exceeds the N = 4 proposed cap of about 2.63.
        let too_hot = PrivacyBudget::new(1.0, 2.8, 30.0, 0.01, BoundMethod::Proposed).unwrap();
        assert!(!too_hot.admissible(4).unwrap());
        // The same scale fails the (tighter) Bernstein condition too.
        let bern = PrivacyBudget::new(1.0, 1.5, 30.0, 0.01, BoundMethod::Bernstein).unwrap();
        assert!(!bern.admissible(4).unwrap());
        assert!(PrivacyBudget::new(0.0, 2.0, 30.0, 0.01, BoundMethod::Proposed).is_err());
        assert!(PrivacyBudget::new(1.0, -1.0, 30.0, 0.01, BoundMethod::Proposed).is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        /// The analytic tail bound dominates the Monte Carlo estimate up to
        /// sampling error.
        #[test]
        fn tail_bound_soundness(
            n in 1u32..=16,
            rho in 1.0f64..30.0,
            lambda in 5.0f64..100.0,
            seed in 0u64..1_000_000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = 20_000;
            let estimate = empirical_tail(n, rho, lambda, samples, &mut rng);
            let bound = (2.0 * psi(n, lambda / rho).unwrap()).min(1.0);
            let sigma = (bound * (1.0 - bound) / samples as f64).sqrt();
            prop_assert!(
                estimate <= bound + 3.0 * sigma + 1e-3,
                "estimate {estimate} above bound {bound} (n={n}, y={})",
                lambda / rho
            );
        }

        /// psi stays within (0, 1] and the proposed ratio is monotone
        /// increasing in lambda.
        #[test]
        fn psi_range_and_ratio_monotonicity(
            n in 1u32..=32,
            // Past y of a few thousand the value underflows to exactly 0;
            // stay inside the representable tail.
            y in 1e-6f64..500.0,
            lambda in 1.0f64..200.0,
        ) {
            let v = psi(n, y).unwrap();
            prop_assert!(v > 0.0 && v <= 1.0, "psi_{n}({y}) = {v}");
            let base = max_ratio_proposed(n, lambda, 0.01).unwrap();
            let bigger = max_ratio_proposed(n, lambda * 1.5, 0.01).unwrap();
            prop_assert!(bigger > base);
        }
    }
}
