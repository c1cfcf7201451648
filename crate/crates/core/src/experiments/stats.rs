//! Goodness-of-fit helpers: Kolmogorov-Smirnov distance, empirical
//! quantiles and a Poisson chi-square table.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `sup_x |F_hat(x) - cdf(x)|`, attained at a sample point.
pub fn ks_distance<C: Fn(f64) -> f64>(samples: &[f64], cdf: C) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("KS distance of an empty sample".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    Ok(ks_sorted(&x, &cdf))
}

fn ks_sorted<C: Fn(f64) -> f64>(sorted: &[f64], cdf: &C) -> f64 {
    let n = sorted.len() as f64;
    let mut best = 0.0f64;
    for (i, &xi) in sorted.iter().enumerate() {
        let f = cdf(xi);
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        best = best.max(hi.abs()).max(lo.abs());
    }
    best
}

/// Smallest KS distance of `samples + delta` over `delta` in
/// `[-band, band]` (201 evenly spaced shifts).
pub fn ks_distance_shifted<C: Fn(f64) -> f64>(samples: &[f64], cdf: C, band: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("KS distance of an empty sample".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    if !(band > 0.0) {
        return Ok(ks_sorted(&x, &cdf));
    }
    let band = band.min(1e3);
    let steps = 200;
    let mut best = f64::INFINITY;
    for k in 0..=steps {
        let delta = -band + 2.0 * band * k as f64 / steps as f64;
        best = best.min(ks_sorted(&x, &|v| cdf(v + delta)));
    }
    Ok(best)
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain("quantile needs data and p in [0, 1]".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let h = (x.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(x.len() - 1);
    Ok(x[lo] + (h - lo as f64) * (x[hi] - x[lo]))
}

pub fn median(samples: &[f64]) -> Result<f64> {
    quantile(samples, 0.5)
}

/// Pearson chi-square of observed counts against `Poisson(lambda)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChiSquare {
    pub statistic: f64,
    /// Number of bins minus one; the p-value is left to callers with a
    /// chi-square distribution at hand.
    pub dof: usize,
    /// Lower edge of each bin; the last bin is open-ended.
    pub bin_lo: Vec<u64>,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
}

/// Bins `0, 1, ...` are merged from the left until each expects at least
/// 5 counts; the remainder forms an open last bin.
pub fn poisson_chi_square(counts: &[u64], lambda: f64) -> Result<ChiSquare> {
    if counts.is_empty() {
        return Err(Error::Domain("chi-square of an empty sample".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(alloc::format!("Poisson mean {lambda} must be finite and >= 0")));
    }
    let n = counts.len() as f64;
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let mut bin_lo = Vec::new();
    let mut expected = Vec::new();
    let mut pmf = libm::exp(-lambda);
    let mut cdf = 0.0;
    let mut acc = 0.0;
    let mut start = 0u64;
    let mut k = 0u64;
    loop {
        acc += n * pmf;
        cdf += pmf;
        k += 1;
        let rest = n * (1.0 - cdf).max(0.0);
        if acc >= 5.0 && rest >= 5.0 {
            bin_lo.push(start);
            expected.push(acc);
            acc = 0.0;
            start = k;
        } else if rest < 5.0 || k > max_count.max(1) + 1000 {
            // Close with an open tail bin holding everything left.
            bin_lo.push(start);
            expected.push(acc + rest);
            break;
        }
        pmf *= lambda / k as f64;
    }
    // A final bin below 5 is merged into its neighbour.
    if expected.len() > 1 && *expected.last().unwrap_or(&0.0) < 5.0 {
        let last = expected.pop().unwrap_or(0.0);
        bin_lo.pop();
        if let Some(prev) = expected.last_mut() {
            *prev += last;
        }
    }
    let mut observed = alloc::vec![0u64; bin_lo.len()];
    for &c in counts {
        let idx = bin_lo.partition_point(|&lo| lo <= c) - 1;
        observed[idx] += 1;
    }
    let statistic = observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| if e > 0.0 { (o as f64 - e) * (o as f64 - e) / e } else { 0.0 })
        .sum();
    Ok(ChiSquare { statistic, dof: bin_lo.len().saturating_sub(1), bin_lo, observed, expected })
}
