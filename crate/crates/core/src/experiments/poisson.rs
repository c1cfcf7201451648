use alloc::vec::Vec;

use super::stats::{poisson_chi_square, ChiSquare};
use super::ExperimentConfig;
use crate::constants::JProfile;
use crate::error::{Error, Result};
use crate::exec::{mean_and_stderr, pairwise_sum, Executor};
use crate::field::PrefixSumTable;
use crate::rng::{derive_seed, StreamRng};
use crate::scan::{block_maxima, WindowFamily};
use crate::theory::{clump_rate, normalizer, Setting};

/// Block layout of a clump experiment.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClumpLayout {
    pub threshold: f64,
    /// Block side in lattice points.
    pub block: usize,
    /// Side-count bounds of the scanned windows (axis 0).
    pub side_min: usize,
    pub side_max: usize,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoissonReport {
    pub counts: Vec<u64>,
    pub lambda_predicted: f64,
    pub mean: f64,
    pub variance: f64,
    /// `variance / mean`, absent when the mean is 0.
    pub dispersion: Option<f64>,
    pub chi_square: ChiSquare,
    /// `3 sqrt(lambda / reps) (1 + lambda)`.
    pub mean_band: f64,
    pub mean_within_band: bool,
    pub dispersion_within_band: bool,
    pub layout: Option<ClumpLayout>,
}

/// Dispersion band for a count sample to pass as Poisson.
pub const DISPERSION_BAND: (f64, f64) = (0.75, 1.25);

/// Summary statistics of counts against `Poisson(lambda)`.
pub fn evaluate_counts(counts: Vec<u64>, lambda: f64) -> Result<PoissonReport> {
    if counts.is_empty() {
        return Err(Error::Domain("no counts to evaluate".into()));
    }
    let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let n = as_f.len() as f64;
    let (mean, _) = mean_and_stderr(&as_f);
    let variance = if as_f.len() > 1 {
        pairwise_sum(&as_f.iter().map(|x| (x - mean) * (x - mean)).collect::<Vec<_>>()) / (n - 1.0)
    } else {
        0.0
    };
    let dispersion = if mean > 0.0 { Some(variance / mean) } else { None };
    let mean_band = 3.0 * libm::sqrt(lambda / n) * (1.0 + lambda);
    let chi_square = poisson_chi_square(&counts, lambda)?;
    Ok(PoissonReport {
        mean_within_band: libm::fabs(mean - lambda) <= mean_band,
        dispersion_within_band: dispersion.is_some_and(|v| v >= DISPERSION_BAND.0 && v <= DISPERSION_BAND.1),
        counts,
        lambda_predicted: lambda,
        mean,
        variance,
        dispersion,
        chi_square,
        mean_band,
        layout: None,
    })
}

const SYNTHETIC_TAG: u64 = 0x5359_4e54; // "SYNT"

/// Counts of `blocks` independent Bernoulli(`p`) events per replication,
/// checked against `Poisson(blocks p)`. Validates the checker itself.
pub fn synthetic_poisson_check<E: Executor>(
    blocks: usize,
    p: f64,
    replications: usize,
    seed: u64,
    exec: &E,
) -> Result<PoissonReport> {
    if !(0.0..=1.0).contains(&p) || blocks == 0 || replications == 0 {
        return Err(Error::Config("need blocks >= 1, replications >= 1 and p in [0, 1]".into()));
    }
    let seed = derive_seed(seed, SYNTHETIC_TAG);
    let counts = exec.map_indexed(replications, |r| {
        let mut rng = StreamRng::new(seed, r as u64);
        (0..blocks).filter(|_| rng.uniform() < p).count() as u64
    });
    evaluate_counts(counts, blocks as f64 * p)
}

/// Number of blocks whose side-restricted scan maximum exceeds
/// `u_n(tau)`, per replication.
///
/// Discrete settings scan windows with side counts in `[a l_n, b l_n]`,
/// `l_n = floor(log n)`, and group window origins into `l_n`-sided blocks.
/// Continuous settings scan lengths in `[a, b]` on the `q`-grid with unit
/// blocks. Boundary blocks are truncated.
pub fn run_poisson_clumps<E: Executor>(
    cfg: &ExperimentConfig,
    tau: f64,
    a: f64,
    b: f64,
    profile: Option<&JProfile>,
    exec: &E,
) -> Result<PoissonReport> {
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(Error::Domain(alloc::format!("need 0 < a < b < inf, got a = {a}, b = {b}")));
    }
    cfg.validate()?;
    let s = &cfg.setting;
    let dims = cfg.lattice_dims()?;
    let d = s.d;
    let (family, block) = match s.family {
        Setting::DiscreteCube | Setting::DiscreteRect => {
            let l = libm::floor(libm::log(s.n)).max(1.0);
            let lo = (libm::ceil(a * l - 1e-9) as usize).max(1);
            let hi = (libm::floor(b * l + 1e-9) as usize).min(dims[0]);
            if hi < lo {
                return Err(Error::Config(alloc::format!("no side count in [{}, {}]", a * l, b * l)));
            }
            let fam = if s.family == Setting::DiscreteCube {
                WindowFamily::cubes(d, lo, Some(hi))
            } else {
                WindowFamily::rects(alloc::vec![lo; d], Some(alloc::vec![hi; d]))
            };
            (fam, l as usize)
        }
        Setting::ContinuousCube | Setting::ContinuousRect => {
            let q = cfg.family.grid_step;
            let fam =
                WindowFamily::grid(s.family == Setting::ContinuousCube, &alloc::vec![a; d], &alloc::vec![b; d], q)?;
            (fam, libm::round(1.0 / q).max(1.0) as usize)
        }
        Setting::Iid => return Err(Error::NotApplicable("no clumps for i.i.d. maxima".into())),
    };
    let resolved = family.resolve(&dims).map_err(|e| Error::Config(alloc::format!("{e}")))?;
    let threshold = normalizer(s, tau)?;
    let lambda = clump_rate(s, tau, a, b, profile)?;
    let counts = exec
        .map_indexed(cfg.replications, |r| -> Result<u64> {
            let field = cfg.source.field(&dims, cfg.master_seed, r as u64)?;
            let table = PrefixSumTable::build(&field);
            Ok(block_maxima(&table, &family, block)?.count_above(threshold) as u64)
        })
        .into_iter()
        .collect::<Result<Vec<u64>>>()?;
    let mut report = evaluate_counts(counts, lambda)?;
    report.layout =
        Some(ClumpLayout { threshold, block, side_min: resolved.side_lo[0], side_max: resolved.side_hi[0], tau, a, b });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::integrate_g_d;
    use crate::exec::Serial;
    use crate::experiments::FieldSource;
    use crate::theory::SettingSpec;

    #[test]
    fn synthetic_independent_events_look_poisson() {
        let r = synthetic_poisson_check(2000, 5e-4, 4000, 7, &Serial).unwrap();
        assert!((r.lambda_predicted - 1.0).abs() < 1e-12);
        assert!(r.mean_within_band, "{} vs {}", r.mean, r.lambda_predicted);
        assert!(r.dispersion_within_band, "{:?}", r.dispersion);
        assert!(r.chi_square.dof >= 2);
    }

    #[test]
    fn evaluation_edge_cases() {
        let r = evaluate_counts(alloc::vec![0, 0, 0], 0.0).unwrap();
        assert_eq!(r.dispersion, None);
        assert!(!r.dispersion_within_band);
        assert!(evaluate_counts(alloc::vec![], 1.0).is_err());
        let r = evaluate_counts(alloc::vec![1, 3], 2.0).unwrap();
        assert_eq!(r.mean, 2.0);
        assert_eq!(r.variance, 2.0);
        assert_eq!(r.dispersion, Some(1.0));
    }

    #[test]
    fn high_threshold_gives_no_clumps() {
        let s = SettingSpec::new(Setting::DiscreteRect, 1, 256.0).with_constant(integrate_g_d(1, 1e-8).unwrap());
        let cfg = ExperimentConfig::new(s, 20, 3);
        let r = run_poisson_clumps(&cfg, 6.0, 0.5, 3.0, None, &Serial).unwrap();
        assert!(r.lambda_predicted < 0.01);
        assert!(r.counts.iter().filter(|&&c| c > 0).count() <= 1);
        let layout = r.layout.unwrap();
        assert_eq!(layout.block, 5);
        assert_eq!((layout.side_min, layout.side_max), (3, 15));
        assert!(run_poisson_clumps(&cfg, 0.0, 3.0, 0.5, None, &Serial).is_err());
    }

    #[test]
    fn zero_field_counts_nothing_at_positive_threshold() {
        let s = SettingSpec::new(Setting::ContinuousRect, 1, 8.0).with_a(0.5);
        let fam = WindowFamily::grid(false, &[0.5], &[2.0], 0.125).unwrap();
        let cfg = ExperimentConfig::new(s, 4, 1).with_family(fam).with_source(FieldSource::Zero);
        let r = run_poisson_clumps(&cfg, 0.0, 0.5, 2.0, None, &Serial).unwrap();
        assert_eq!(r.counts, alloc::vec![0; 4]);
        assert_eq!(r.layout.unwrap().block, 8);
    }
}
