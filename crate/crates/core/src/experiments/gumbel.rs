use alloc::vec::Vec;

use super::stats::{ks_distance, ks_distance_shifted, quantile};
use super::{replicate_maxima, ExperimentConfig};
use crate::error::Result;
use crate::exec::Executor;
use crate::special::{gumbel_cdf, gumbel_quantile};
use crate::theory::{invert_normalizer, tau_band};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Quantile {
    pub p: f64,
    pub empirical: f64,
    pub gumbel: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GumbelReport {
    /// `tau_hat` per replication, in replication order.
    pub tau_samples: Vec<f64>,
    pub maxima: Vec<f64>,
    pub ks_distance: f64,
    /// Half-width of the `tau` shift allowed by the constant's error.
    pub tau_band: f64,
    /// Smallest KS distance over shifts within `tau_band`.
    pub ks_widened: f64,
    pub quantiles: Vec<Quantile>,
}

const QUANTILE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Maps each replication's scan maximum through the inverse normalizer
/// and compares the resulting `tau_hat` with `exp(-e^-tau)`.
pub fn run_gumbel<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<GumbelReport> {
    let maxima = replicate_maxima(cfg, exec)?;
    let tau_samples = maxima.iter().map(|&m| invert_normalizer(&cfg.setting, m)).collect::<Result<Vec<f64>>>()?;
    let ks = ks_distance(&tau_samples, gumbel_cdf)?;
    let band = tau_band(&cfg.setting);
    let ks_widened = ks_distance_shifted(&tau_samples, gumbel_cdf, band)?;
    let quantiles = QUANTILE_LEVELS
        .iter()
        .map(|&p| Ok(Quantile { p, empirical: quantile(&tau_samples, p)?, gumbel: gumbel_quantile(p) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(GumbelReport { tau_samples, maxima, ks_distance: ks, tau_band: band, ks_widened, quantiles })
}
