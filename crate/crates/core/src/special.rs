//! Gaussian tail and distribution helpers.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

/// Upper tail of the standard normal law, `P[N(0,1) > x]`, via `erfc`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Gumbel distribution function `exp(-exp(-x))`.
pub fn gumbel_cdf(x: f64) -> f64 {
    libm::exp(-libm::exp(-x))
}

/// Gumbel quantile, inverse of [`gumbel_cdf`] on `(0, 1)`.
pub fn gumbel_quantile(p: f64) -> f64 {
    -libm::log(-libm::log(p))
}
