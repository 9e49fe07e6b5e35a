//! Standard normal density and tail helpers.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// 1/sqrt(2 pi)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `Phi(-z) = P(Z > z)`, computed without cancellation.
#[inline]
pub fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

pub fn ln_2pi() -> f64 {
    (2.0 * PI).ln()
}
