use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::FieldSource;
use crate::constants::pickands_f;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::field::PrefixSumTable;
use crate::scan::{scan_resolved, WindowFamily};
use crate::theory::{tail_asymptotic, tail_asymptotic_grid, Region, Shape};

/// Direct Monte Carlo of `P[max over region windows on a q-grid > u]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailConfig {
    pub d: usize,
    pub shape: Shape,
    pub region: Region,
    pub u: f64,
    pub q: f64,
    pub replications: usize,
    pub master_seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub source: FieldSource,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailReport {
    /// `q u^2`.
    pub kappa: f64,
    pub hits: u64,
    pub probability: f64,
    pub stderr: f64,
    /// Grid-corrected leading-order probability at `kappa`.
    pub asymptotic_grid: f64,
    /// Continuum leading-order probability, for reference.
    pub asymptotic_continuous: Option<f64>,
    pub ratio: f64,
    pub ratio_stderr: f64,
}

/// Fewer expected hits than this is refused as underpowered.
pub const MIN_EXPECTED_HITS: f64 = 10.0;

/// Index layout of the region on the `q`-grid.
struct GridLayout {
    dims: Vec<usize>,
    origin_max: Vec<usize>,
    side_lo: Vec<usize>,
    side_hi: Vec<usize>,
}

fn layout(cfg: &TailConfig) -> Result<GridLayout> {
    let q = cfg.q;
    let r = &cfg.region;
    let mut out = GridLayout { dims: Vec::new(), origin_max: Vec::new(), side_lo: Vec::new(), side_hi: Vec::new() };
    for i in 0..cfg.d {
        let axis = if cfg.shape == Shape::Cube { 0 } else { i };
        let o_max = libm::floor((r.origin_hi[i] - r.origin_lo[i]) / q + 1e-9) as usize;
        let s_lo = (libm::ceil(r.len_lo[axis] / q - 1e-9) as usize).max(1);
        let s_hi = libm::floor(r.len_hi[axis] / q + 1e-9) as usize;
        if s_hi < s_lo {
            return Err(Error::Config(alloc::format!("no grid length in [{}, {}]", r.len_lo[axis], r.len_hi[axis])));
        }
        out.dims.push(o_max + s_hi);
        out.origin_max.push(o_max);
        out.side_lo.push(s_lo);
        out.side_hi.push(s_hi);
    }
    let cells: usize = out.dims.iter().product();
    if cells > crate::field::MAX_CELLS {
        return Err(Error::Oversize { cells, limit: crate::field::MAX_CELLS });
    }
    Ok(out)
}

/// One-dimensional exceedance test with an exact bound per origin:
/// `S/sqrt(s) <= (max_j P[j] - P[i]) / sqrt(s_lo)` over the admissible ends.
fn exceeds_1d(prefix: &[f64], g: &GridLayout, u: f64, window: &mut VecDeque<usize>) -> bool {
    let (s_lo, s_hi) = (g.side_lo[0], g.side_hi[0]);
    let inv_lo = 1.0 / libm::sqrt(s_lo as f64);
    window.clear();
    let mut next = s_lo;
    for i in 0..=g.origin_max[0] {
        // Ends j in [i + s_lo, i + s_hi], kept as a decreasing deque.
        while next <= i + s_hi {
            while window.back().is_some_and(|&k| prefix[k] <= prefix[next]) {
                window.pop_back();
            }
            window.push_back(next);
            next += 1;
        }
        while window.front().is_some_and(|&k| k < i + s_lo) {
            window.pop_front();
        }
        let top = prefix[*window.front().unwrap_or(&(i + s_lo))] - prefix[i];
        if top * inv_lo <= u {
            continue;
        }
        for s in s_lo..=s_hi {
            if (prefix[i + s] - prefix[i]) / libm::sqrt(s as f64) > u {
                return true;
            }
        }
    }
    false
}

/// Estimates the exceedance probability on the grid and compares it with
/// [`tail_asymptotic_grid`] at `kappa = q u^2`.
///
/// Cube regions in `d >= 2` need `e_grid` to supply `E_d(kappa)`; at
/// `d = 1` it is `F(kappa)^2`.
pub fn run_tail_comparison<E: Executor>(
    cfg: &TailConfig,
    e_grid: Option<&dyn Fn(f64) -> Result<f64>>,
    exec: &E,
) -> Result<TailReport> {
    if !(cfg.u >= 2.0 && cfg.u.is_finite()) {
        return Err(Error::Domain(alloc::format!("u = {} is below 2; the tail formula does not apply", cfg.u)));
    }
    if !(cfg.q > 0.0 && cfg.q.is_finite()) {
        return Err(Error::Domain(alloc::format!("grid step {} must be positive", cfg.q)));
    }
    if cfg.replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    let kappa = cfg.q * cfg.u * cfg.u;
    let f_squared = |k: f64| -> Result<f64> {
        let f = pickands_f(k, 1e-12)?.value;
        Ok(f * f)
    };
    let provider: Option<&dyn Fn(f64) -> Result<f64>> = if cfg.d == 1 { Some(&f_squared) } else { e_grid };
    let asymptotic_grid = tail_asymptotic_grid(cfg.shape, &cfg.region, cfg.u, kappa, cfg.d, provider)?;
    let asymptotic_continuous = match cfg.shape {
        Shape::Rect => Some(tail_asymptotic(Shape::Rect, &cfg.region, cfg.u, cfg.d, None)?),
        Shape::Cube if cfg.d == 1 => Some(tail_asymptotic(Shape::Cube, &cfg.region, cfg.u, 1, Some(0.25))?),
        Shape::Cube => None,
    };
    let expected = asymptotic_grid * cfg.replications as f64;
    if expected < MIN_EXPECTED_HITS {
        return Err(Error::Underpowered(alloc::format!(
            "{expected:.2} expected exceedances at {} replications; need at least {MIN_EXPECTED_HITS}",
            cfg.replications
        )));
    }
    let g = layout(cfg)?;
    let family = if cfg.shape == Shape::Cube {
        WindowFamily::cubes(cfg.d, g.side_lo[0], Some(g.side_hi[0]))
    } else {
        WindowFamily::rects(g.side_lo.clone(), Some(g.side_hi.clone()))
    }
    .with_origin_max(g.origin_max.clone());
    let resolved = family.resolve(&g.dims)?;
    let hits: Vec<bool> = exec
        .map_indexed(cfg.replications, |r| -> Result<bool> {
            let field = cfg.source.field(&g.dims, cfg.master_seed, r as u64)?;
            if cfg.d == 1 {
                let mut prefix = Vec::with_capacity(field.values().len() + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for v in field.values() {
                    acc += v;
                    prefix.push(acc);
                }
                Ok(exceeds_1d(&prefix, &g, cfg.u, &mut VecDeque::new()))
            } else {
                let table = PrefixSumTable::build(&field);
                Ok(scan_resolved(&table, &resolved).max_value > cfg.u)
            }
        })
        .into_iter()
        .collect::<Result<Vec<bool>>>()?;
    let hit_count = hits.iter().filter(|&&h| h).count() as u64;
    let n = cfg.replications as f64;
    let probability = hit_count as f64 / n;
    let stderr = libm::sqrt(probability * (1.0 - probability) / n);
    Ok(TailReport {
        kappa,
        hits: hit_count,
        probability,
        stderr,
        asymptotic_grid,
        asymptotic_continuous,
        ratio: probability / asymptotic_grid,
        ratio_stderr: stderr / asymptotic_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use crate::field::GaussianLatticeField;
    use crate::scan::scan_naive;
    use alloc::vec;

    fn cfg(reps: usize) -> TailConfig {
        TailConfig {
            d: 1,
            shape: Shape::Rect,
            region: Region::uniform(1, (0.0, 1.0), (1.0, 2.0)),
            u: 4.0,
            q: 0.05,
            replications: reps,
            master_seed: 5,
            source: FieldSource::Gaussian,
        }
    }

    #[test]
    fn guards() {
        let mut c = cfg(100_000);
        c.u = 1.5;
        assert!(matches!(run_tail_comparison(&c, None, &Serial), Err(Error::Domain(_))));
        let c = cfg(100);
        assert!(matches!(run_tail_comparison(&c, None, &Serial), Err(Error::Underpowered(_))));
        let mut c = cfg(100_000);
        c.d = 2;
        c.shape = Shape::Cube;
        c.region = Region::uniform(2, (0.0, 1.0), (1.0, 2.0));
        assert!(matches!(run_tail_comparison(&c, None, &Serial), Err(Error::Config(_))));
    }

    #[test]
    fn pruned_test_matches_full_scan() {
        let c = cfg(1);
        let g = layout(&c).unwrap();
        assert_eq!(g.dims, vec![60]);
        let family =
            WindowFamily::rects(g.side_lo.clone(), Some(g.side_hi.clone())).with_origin_max(g.origin_max.clone());
        for seed in 0..300u64 {
            let f = GaussianLatticeField::generate(&g.dims, seed, 0).unwrap();
            let mut prefix = vec![0.0];
            for v in f.values() {
                prefix.push(prefix.last().unwrap() + v);
            }
            let best = scan_naive(&f, &family).unwrap().max_value;
            for &u in &[0.5, 1.0, 1.5, 2.0, 2.5] {
                assert_eq!(exceeds_1d(&prefix, &g, u, &mut VecDeque::new()), best > u, "seed {seed} u {u}");
            }
        }
    }

    #[test]
    fn zero_field_never_exceeds() {
        let mut c = cfg(50_000);
        c.source = FieldSource::Zero;
        let r = run_tail_comparison(&c, None, &Serial).unwrap();
        assert_eq!(r.hits, 0);
        assert!((r.kappa - 0.8).abs() < 1e-12);
    }

    #[test]
    fn stderr_scales_with_replications() {
        let mut c = cfg(20_000);
        c.u = 3.0;
        let a = run_tail_comparison(&c, None, &Serial).unwrap();
        c.replications = 80_000;
        let b = run_tail_comparison(&c, None, &Serial).unwrap();
        let ratio = a.stderr / b.stderr;
        assert!((ratio - 2.0).abs() < 0.6, "{ratio}");
    }
}
