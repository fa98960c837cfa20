//! High-accuracy complementary error function, built from scratch.
//!
//! The coverage coefficient of the association model is exponentially
//! sensitive to `erfc^{-1}`, so this module targets a relative error of at
//! most 1e-14 across the whole double range instead of relying on a coarse
//! approximation. Two classical expansions cover the axis:
//!
//! * `0 <= x < 1`: the all-positive-term power series
//!   `erf(x) = (2x e^{-x^2}/sqrt(pi)) * sum_n (2x^2)^n / (1*3*...*(2n+1))`,
//!   followed by `erfc = 1 - erf`. Every term is positive, so the sum itself
//!   carries no cancellation; the final subtraction loses at most a factor
//!   `erf/erfc < 5.4` of precision on this interval.
//! * `x >= 1`: the Laplace continued fraction
//!   `erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x+ (1/2)/(x+ (2/2)/(x+ ...)))`,
//!   evaluated with the modified Lentz algorithm. It converges in well under
//!   200 iterations for every x >= 1 and never cancels.
//!
//! Negative arguments use the reflection `erfc(-x) = 2 - erfc(x)`.
//!
//! `erfc` underflows to zero for x beyond roughly 27.3, where the true value
//! drops below the smallest subnormal double.

const FRAC_2_SQRT_PI: f64 = 1.128_379_167_095_512_6; // 2/sqrt(pi)

/// Complementary error function `erfc(x) = 1 - erf(x)`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 1.0 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// Power series for erf on [0, 1): all terms positive, no cancellation.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        term *= 2.0 * x2 / f64::from(2 * n + 3);
        let prev = sum;
        sum += term;
        n += 1;
        if sum == prev || n > 200 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// Laplace continued fraction for erfc on [1, inf), via modified Lentz.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    // erfc(x) * sqrt(pi) * e^{x^2} = 1/(x+ (1/2)/(x+ (2/2)/(x+ (3/2)/(x+ ...))))
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    let mut a = 1.0; // numerator a_1 = 1; thereafter a_j = (j-1)/2
    for j in 1..=500u32 {
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
        a = f64::from(j) / 2.0;
    }
    (FRAC_2_SQRT_PI / 2.0) * (-x * x).exp() * f
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference values computed with 30-digit arithmetic.
    const TABLE: &[(f64, f64)] = &[
        (0.01, 0.98871658444415038),
        (0.1, 0.88753708398171511),
        (0.25, 0.72367360983176307),
        (0.5, 0.47950012218695346),
        (0.75, 0.28884436634648487),
        (0.9, 0.20309178757716787),
        (1.0, 0.15729920705028513),
        (1.1, 0.1197949304259183),
        (1.5, 0.033894853524689273),
        (2.0, 0.0046777349810472658),
        (2.5, 0.00040695201744495894),
        (3.0, 2.2090496998585441e-5),
        (3.41, 1.4179260654592316e-6),
        (4.0, 1.5417257900280019e-8),
        (5.0, 1.5374597944280349e-12),
        (6.0, 2.1519736712498913e-17),
        (8.0, 1.1224297172982927e-29),
        (10.0, 2.0884875837625448e-45),
        (15.0, 7.2129941724512067e-100),
        (20.0, 5.3958656116079009e-176),
        (26.5, 2.2109076642637343e-307),
        (-0.5, 1.5204998778130465),
        (-1.0, 1.8427007929497149),
        (-2.0, 1.9953222650189527),
        (-3.0, 1.9999779095030014),
        (-5.0, 1.9999999999984625),
    ];

    #[test]
    fn matches_reference_table_to_1e14() {
        for &(x, want) in TABLE {
            let got = erfc(x);
            let rel = ((got - want) / want).abs();
            assert!(
                rel <= 1e-14,
                "erfc({x}) = {got:e}, want {want:e}, rel err {rel:e}"
            );
        }
    }

    #[test]
    fn exact_anchor_points() {
        assert_eq!(erfc(0.0), 1.0);
        assert!(erfc(f64::NAN).is_nan());
        // Far past the representable range the function underflows to 0.
        assert_eq!(erfc(40.0), 0.0);
        assert_eq!(erfc(-40.0), 2.0);
    }

    #[test]
    fn reflection_identity() {
        for &x in &[0.3, 0.7, 1.2, 2.4, 4.8] {
            let sum = erfc(x) + erfc(-x);
            assert!((sum - 2.0).abs() < 1e-15, "erfc({x})+erfc(-{x}) = {sum}");
        }
    }

    #[test]
    fn strictly_decreasing_on_grid() {
        // Strict decrease is only representable while adjacent values differ
        // by more than one ULP of the result; past x of about -5.7 the value
        // 2 - erfc(-x) rounds to exactly 2, so the strict grid stops there.
        let mut prev = erfc(-5.5);
        let mut x = -5.5f64;
        while x < 26.0 {
            x += 0.05;
            let cur = erfc(x);
            assert!(cur < prev, "erfc not decreasing at x = {x}");
            prev = cur;
        }
        // Beyond the strict window the function is still monotone (weakly).
        assert!(erfc(-8.0) <= 2.0 && erfc(-8.0) >= erfc(-5.5));
    }
}
