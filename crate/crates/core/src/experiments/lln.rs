use alloc::vec::Vec;

use super::stats::median;
use super::{replicate_maxima, ExperimentConfig};
use crate::error::Result;
use crate::exec::Executor;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LlnReport {
    /// `max / sqrt(2 d log n)` per replication.
    pub ratios: Vec<f64>,
    pub median: f64,
}

/// `max_A S(A)/sqrt|A| / sqrt(2 d log n)` for each replication; tends to 1
/// almost surely.
pub fn run_lln<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<LlnReport> {
    let scale = cfg.setting.scale();
    let ratios: Vec<f64> = replicate_maxima(cfg, exec)?.into_iter().map(|m| m / scale).collect();
    let median = median(&ratios)?;
    Ok(LlnReport { ratios, median })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::integrate_g_d;
    use crate::exec::Serial;
    use crate::experiments::FieldSource;
    use crate::theory::{Setting, SettingSpec};

    #[test]
    fn zero_field_ratio() {
        let s = SettingSpec::new(Setting::DiscreteCube, 1, 64.0).with_constant(integrate_g_d(1, 1e-8).unwrap());
        let cfg = ExperimentConfig::new(s, 3, 1).with_source(FieldSource::Zero);
        let r = run_lln(&cfg, &Serial).unwrap();
        assert_eq!(r.ratios, alloc::vec![0.0; 3]);
        assert_eq!(r.median, 0.0);
    }
}
