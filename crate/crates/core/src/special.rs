//! Gaussian tail functions evaluated in f64, stable in the far tails.

use statrs::function::erf::{erf, erfc};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn log_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `Q(x) = 1 - Φ(x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

pub fn erf_f64(x: f64) -> f64 {
    erf(x)
}

/// `ln Φ(x)`, using the asymptotic series below -20 where erfc underflows.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > -20.0 {
        return norm_cdf(x).ln();
    }
    let x2 = x * x;
    let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + series.ln()
}

/// `ln(Φ(b) - Φ(a))` for `a <= b`.
pub fn log_norm_interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return f64::NEG_INFINITY;
    }
    if a > 0.0 {
        // both in the upper tail: Q(a) - Q(b)
        let la = log_norm_cdf(-a);
        let lb = log_norm_cdf(-b);
        la + (-(lb - la).exp()).ln_1p()
    } else if b < 0.0 {
        let la = log_norm_cdf(a);
        let lb = log_norm_cdf(b);
        lb + (-(la - lb).exp()).ln_1p()
    } else {
        (1.0 - q_func(b) - norm_cdf(a)).ln()
    }
}

/// Mean of a standard normal truncated to `[a, b]`.
pub fn truncated_mean(a: f64, b: f64) -> f64 {
    let lz = log_norm_interval(a, b);
    let pa = if a.is_finite() { (log_norm_pdf(a) - lz).exp() } else { 0.0 };
    let pb = if b.is_finite() { (log_norm_pdf(b) - lz).exp() } else { 0.0 };
    pa - pb
}

/// Second moment of a standard normal truncated to `[a, b]`.
pub fn truncated_second_moment(a: f64, b: f64) -> f64 {
    let lz = log_norm_interval(a, b);
    let ta = if a.is_finite() { a * (log_norm_pdf(a) - lz).exp() } else { 0.0 };
    let tb = if b.is_finite() { b * (log_norm_pdf(b) - lz).exp() } else { 0.0 };
    1.0 + ta - tb
}
