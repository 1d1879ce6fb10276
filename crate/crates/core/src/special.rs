//! Error-function family in forms that stay finite deep in the tails.
//!
//! Everything downstream multiplies huge image-term exponentials by tiny
//! Gaussian tail masses, so the tails are carried as `erfcx` or as logarithms.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Past this point `erfc` underflows towards subnormals and the continued
/// fraction below converges in a handful of terms.
const ERFCX_CF_THRESHOLD: f64 = 26.0;

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < ERFCX_CF_THRESHOLD {
        // x^2 = hi + lo exactly, so exp(x^2) keeps full relative precision.
        let hi = x * x;
        let lo = x.mul_add(x, -hi);
        return libm::erfc(x) * hi.exp() * lo.exp();
    }
    // erfcx(x) = 1/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut tail = x;
    for n in (1..=40).rev() {
        tail = x + 0.5 * n as f64 / tail;
    }
    FRAC_1_SQRT_PI / tail
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF, accurate in relative terms for large negative `z`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - Phi(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// `ln Phi(z)`; finite for every finite `z`.
pub fn ln_normal_cdf(z: f64) -> f64 {
    if z > 0.0 {
        (-normal_sf(z)).ln_1p()
    } else if z > -1.0 {
        normal_cdf(z).ln()
    } else {
        (0.5 * erfcx(-z * FRAC_1_SQRT_2)).ln() - 0.5 * z * z
    }
}

/// `ln(1 / sqrt(4 pi D t))` written in terms of the variance `2 D t`.
pub(crate) fn ln_gaussian_norm(variance: f64) -> f64 {
    -0.5 * (2.0 * PI * variance).ln()
}
