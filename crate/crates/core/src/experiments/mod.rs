//! Monte Carlo harnesses for the limit theorems.
//!
//! Replication `r` always draws its field from stream `r` of the master
//! seed, and results are gathered in replication order, so reports do not
//! depend on how an [`Executor`] schedules the work.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::field::{GaussianLatticeField, PrefixSumTable};
use crate::scan::{scan_resolved, WindowFamily, WindowKind};
use crate::theory::{Setting, SettingSpec};

mod gumbel;
mod lln;
mod poisson;
pub mod stats;
mod tail;

pub use gumbel::{run_gumbel, GumbelReport, Quantile};
pub use lln::{run_lln, LlnReport};
pub use poisson::{evaluate_counts, run_poisson_clumps, synthetic_poisson_check, PoissonReport};
pub use stats::{ks_distance, ks_distance_shifted, median, poisson_chi_square, quantile, ChiSquare};
pub use tail::{run_tail_comparison, TailConfig, TailReport};

/// Where replication fields come from. `Zero` is a test hook.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FieldSource {
    #[default]
    Gaussian,
    Zero,
}

impl FieldSource {
    pub(crate) fn field(self, dims: &[usize], seed: u64, stream: u64) -> Result<GaussianLatticeField> {
        match self {
            FieldSource::Gaussian => GaussianLatticeField::generate(dims, seed, stream),
            FieldSource::Zero => GaussianLatticeField::zeros(dims),
        }
    }
}

/// A scan experiment: setting, window family and replication plan.
///
/// For discrete settings the lattice is `{0..n-1}^d`; for continuous ones
/// it is the `q`-grid of `[0, n]^d` with `q` the family's grid step.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    pub setting: SettingSpec,
    pub family: WindowFamily,
    pub replications: usize,
    pub master_seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub source: FieldSource,
}

impl ExperimentConfig {
    /// All windows of the setting's natural family.
    pub fn new(setting: SettingSpec, replications: usize, master_seed: u64) -> Self {
        let d = setting.d;
        let family = match setting.family {
            Setting::DiscreteRect => WindowFamily::rects(vec![1; d], None),
            _ => WindowFamily::cubes(d, 1, None),
        };
        Self { setting, family, replications, master_seed, source: FieldSource::Gaussian }
    }

    pub fn with_family(mut self, family: WindowFamily) -> Self {
        self.family = family;
        self
    }

    pub fn with_source(mut self, source: FieldSource) -> Self {
        self.source = source;
        self
    }

    /// Lattice extents implied by the setting and the grid step.
    pub fn lattice_dims(&self) -> Result<Vec<usize>> {
        let s = &self.setting;
        let per_axis = if s.family.is_continuous() {
            let q = self.family.grid_step;
            libm::round(s.n / q)
        } else {
            libm::round(s.n)
        };
        if !(1.0..1e9).contains(&per_axis) {
            return Err(Error::Config(alloc::format!("lattice side {per_axis} is out of range")));
        }
        if !s.family.is_continuous() && libm::fabs(per_axis - s.n) > 1e-9 {
            return Err(Error::Config(alloc::format!("discrete settings need an integer n, got {}", s.n)));
        }
        Ok(vec![per_axis as usize; s.d])
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let s = &self.setting;
        s.validate()?;
        let kind_ok = match s.family {
            Setting::Iid => false,
            Setting::DiscreteCube => self.family.kind == WindowKind::DiscreteCube,
            Setting::DiscreteRect => self.family.kind == WindowKind::DiscreteRect,
            Setting::ContinuousCube => self.family.kind == WindowKind::GridCube,
            Setting::ContinuousRect => self.family.kind == WindowKind::GridRect,
        };
        if !kind_ok {
            return Err(Error::Config(alloc::format!(
                "window family {:?} does not match setting {:?}",
                self.family.kind,
                s.family
            )));
        }
        let dims = self.lattice_dims()?;
        self.family.resolve(&dims).map_err(|e| Error::Config(alloc::format!("{e}")))?;
        Ok(())
    }
}

/// Scan maximum of every replication, in replication order.
pub(crate) fn replicate_maxima<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dims = cfg.lattice_dims()?;
    let fam = cfg.family.resolve(&dims)?;
    let out = exec.map_indexed(cfg.replications, |r| -> Result<f64> {
        let field = cfg.source.field(&dims, cfg.master_seed, r as u64)?;
        let table = PrefixSumTable::build(&field);
        Ok(scan_resolved(&table, &fam).max_value)
    });
    out.into_iter().collect()
}

#[cfg(test)]
pub(crate) mod testing {
    use crate::exec::Executor;
    use alloc::vec::Vec;

    /// Evaluates indices back to front; results must still come out in order.
    pub struct Reversed;

    impl Executor for Reversed {
        fn map_indexed<T: Send, F: Fn(usize) -> T + Sync>(&self, count: usize, f: F) -> Vec<T> {
            let mut v: Vec<(usize, T)> = (0..count).rev().map(|i| (i, f(i))).collect();
            v.reverse();
            v.into_iter().map(|(_, t)| t).collect()
        }
    }
}
