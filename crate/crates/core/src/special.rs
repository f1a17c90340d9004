//! Standard normal helpers built on `erfc`, accurate in both tails.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn norm_cdf(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    if z == f64::INFINITY {
        return 1.0;
    }
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `P(Z > z)`.
pub fn norm_sf(z: f64) -> f64 {
    norm_cdf(-z)
}

/// Inverse of [`norm_sf`]: the `z` with `P(Z > z) = p`.
pub fn norm_isf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::INFINITY;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let mut z = SQRT_2 * erfc_inv(2.0 * p);
    // the rational approximation is good to ~1e-11; polish with Newton
    for _ in 0..2 {
        let d = norm_pdf(z);
        if d <= 0.0 {
            break;
        }
        z += (norm_sf(z) - p) / d;
    }
    z
}
