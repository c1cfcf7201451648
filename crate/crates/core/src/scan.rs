//! Maxima of `S(A)/sqrt(|A|)` over cube and rectangle window families.
//!
//! Windows are visited side-vector first (lexicographic), then origin
//! (row-major). The first window attaining the maximum wins, which makes
//! the argmax the lexicographically smallest `(sides, origin)` among ties.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{GaussianLatticeField, PrefixSumTable, Window};

/// Largest lattice the naive oracle accepts.
pub const NAIVE_CELL_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum WindowKind {
    DiscreteCube,
    DiscreteRect,
    /// Cubes on a `q`-spaced discretization of a continuous box.
    GridCube,
    /// Rectangles on a `q`-spaced discretization of a continuous box.
    GridRect,
}

impl WindowKind {
    pub fn is_cube(self) -> bool {
        matches!(self, WindowKind::DiscreteCube | WindowKind::GridCube)
    }

    pub fn is_grid(self) -> bool {
        matches!(self, WindowKind::GridCube | WindowKind::GridRect)
    }
}

/// A set of axis-aligned windows described by side-count bounds.
///
/// Side bounds are per axis; cube kinds use axis 0's bounds for all axes.
/// `side_max = None` means "up to the lattice extent". `origin_max`, when
/// set, restricts window origins to `origin_i <= origin_max_i`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowFamily {
    pub kind: WindowKind,
    pub side_min: Vec<usize>,
    pub side_max: Option<Vec<usize>>,
    pub grid_step: f64,
    pub origin_max: Option<Vec<usize>>,
}

impl WindowFamily {
    pub fn cubes(d: usize, side_min: usize, side_max: Option<usize>) -> Self {
        Self {
            kind: WindowKind::DiscreteCube,
            side_min: vec![side_min; d],
            side_max: side_max.map(|m| vec![m; d]),
            grid_step: 1.0,
            origin_max: None,
        }
    }

    pub fn rects(side_min: Vec<usize>, side_max: Option<Vec<usize>>) -> Self {
        Self { kind: WindowKind::DiscreteRect, side_min, side_max, grid_step: 1.0, origin_max: None }
    }

    /// Grid family whose windows have continuous side lengths in
    /// `[a_i, b_i]` on a lattice of spacing `q`.
    pub fn grid(cube: bool, a: &[f64], b: &[f64], q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidFamily(format!("grid step {q} must be positive")));
        }
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::InvalidFamily("length bounds must share a dimension".into()));
        }
        let mut lo = Vec::with_capacity(a.len());
        let mut hi = Vec::with_capacity(a.len());
        for (&ai, &bi) in a.iter().zip(b) {
            if !(ai > 0.0 && bi >= ai) {
                return Err(Error::InvalidFamily(format!("length bounds [{ai}, {bi}]")));
            }
            let s_lo = libm::ceil(ai / q - 1e-9).max(1.0) as usize;
            let s_hi = libm::floor(bi / q + 1e-9) as usize;
            lo.push(s_lo);
            hi.push(s_hi);
        }
        Ok(Self {
            kind: if cube { WindowKind::GridCube } else { WindowKind::GridRect },
            side_min: lo,
            side_max: Some(hi),
            grid_step: q,
            origin_max: None,
        })
    }

    pub fn with_origin_max(mut self, origin_max: Vec<usize>) -> Self {
        self.origin_max = Some(origin_max);
        self
    }

    /// Checks the family against lattice extents and fixes every bound.
    pub fn resolve(&self, dims: &[usize]) -> Result<ResolvedFamily> {
        let d = dims.len();
        if self.kind.is_grid() && !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return Err(Error::InvalidFamily(format!("grid step {} must be positive", self.grid_step)));
        }
        let cube = self.kind.is_cube();
        if self.side_min.is_empty() || (!cube && self.side_min.len() != d) {
            return Err(Error::InvalidFamily(format!("family has {} axes, lattice has {d}", self.side_min.len())));
        }
        let min_extent = *dims.iter().min().unwrap_or(&0);
        let mut lo = vec![0; d];
        let mut hi = vec![0; d];
        for i in 0..d {
            let src = if cube { 0 } else { i };
            lo[i] = self.side_min[src];
            hi[i] = match &self.side_max {
                Some(m) => *m.get(src).ok_or_else(|| Error::InvalidFamily("side_max has too few axes".into()))?,
                None if cube => min_extent,
                None => dims[i],
            };
            let cap = if cube { min_extent } else { dims[i] };
            if lo[i] == 0 || lo[i] > hi[i] || hi[i] > cap {
                return Err(Error::InvalidFamily(format!(
                    "axis {i}: side bounds [{}, {}] not within [1, {cap}]",
                    lo[i], hi[i]
                )));
            }
        }
        let origin_hi = match &self.origin_max {
            Some(o) if o.len() == d => o.clone(),
            Some(o) => return Err(Error::InvalidFamily(format!("origin limit has {} axes, lattice has {d}", o.len()))),
            None => dims.iter().map(|n| n - 1).collect(),
        };
        Ok(ResolvedFamily { cube, dims: dims.to_vec(), side_lo: lo, side_hi: hi, origin_hi })
    }
}

/// A family with all bounds fixed against a particular lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedFamily {
    pub cube: bool,
    pub dims: Vec<usize>,
    pub side_lo: Vec<usize>,
    pub side_hi: Vec<usize>,
    /// Inclusive origin limit per axis (before the fit-inside constraint).
    pub origin_hi: Vec<usize>,
}

impl ResolvedFamily {
    /// Side vectors in scan order.
    pub fn side_vectors(&self) -> Vec<Vec<usize>> {
        let d = self.dims.len();
        if self.cube {
            return (self.side_lo[0]..=self.side_hi[0]).map(|s| vec![s; d]).collect();
        }
        let mut out = Vec::new();
        let mut s = self.side_lo.clone();
        loop {
            out.push(s.clone());
            let mut axis = d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if s[axis] < self.side_hi[axis] {
                    s[axis] += 1;
                    break;
                }
                s[axis] = self.side_lo[axis];
            }
        }
    }

    /// Number of valid origins per axis for a side vector (0 if none).
    pub fn origin_counts(&self, sides: &[usize]) -> Vec<usize> {
        (0..self.dims.len())
            .map(|i| if sides[i] > self.dims[i] { 0 } else { (self.dims[i] - sides[i]).min(self.origin_hi[i]) + 1 })
            .collect()
    }

    /// Closed-form size of the family.
    pub fn window_count(&self) -> u64 {
        self.side_vectors().iter().map(|s| self.origin_counts(s).iter().map(|&c| c as u64).product::<u64>()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanResult {
    pub max_value: f64,
    pub argmax: Window,
    pub windows_scanned: u64,
}

/// Visits every window of the family one origin row at a time.
///
/// `visit(sides, row_origin, raw_sums, inv_sqrt_card)` receives the raw
/// window sums for the origins `row_origin + (0, .., 0, j)`.
pub(crate) fn sweep<V>(table: &PrefixSumTable, fam: &ResolvedFamily, mut visit: V) -> u64
where
    V: FnMut(&[usize], &[usize], &[f64], f64),
{
    let d = table.dim();
    let data = table.as_slice();
    let strides = table.strides();
    let mut scanned = 0u64;
    let mut buf: Vec<f64> = Vec::new();
    for sides in fam.side_vectors() {
        let counts = fam.origin_counts(&sides);
        if counts.contains(&0) {
            continue;
        }
        scanned += counts.iter().map(|&c| c as u64).product::<u64>();
        let corners = table.corner_offsets(&sides);
        let card: usize = sides.iter().product();
        let inv = 1.0 / libm::sqrt(card as f64);
        let row_len = counts[d - 1];
        buf.resize(row_len, 0.0);
        let mut origin = vec![0usize; d];
        loop {
            let base: usize = (0..d - 1).map(|i| origin[i] * strides[i]).sum();
            let (off0, sign0) = corners[0];
            let first = &data[base + off0..base + off0 + row_len];
            for (b, &v) in buf.iter_mut().zip(first) {
                *b = sign0 * v;
            }
            for &(off, sign) in &corners[1..] {
                let src = &data[base + off..base + off + row_len];
                if sign > 0.0 {
                    buf.iter_mut().zip(src).for_each(|(b, &v)| *b += v);
                } else {
                    buf.iter_mut().zip(src).for_each(|(b, &v)| *b -= v);
                }
            }
            visit(&sides, &origin, &buf, inv);
            // Advance the outer (non-contiguous) axes.
            let mut axis = d - 1;
            let done = loop {
                if axis == 0 {
                    break true;
                }
                axis -= 1;
                origin[axis] += 1;
                if origin[axis] < counts[axis] {
                    break false;
                }
                origin[axis] = 0;
            };
            if done {
                break;
            }
        }
    }
    scanned
}

fn first_argmax(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_v = values[0];
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > best_v {
            best = j;
            best_v = v;
        }
    }
    (best, best_v)
}

/// Exact maximum over a resolved family, with the tie rule above.
pub fn scan_resolved(table: &PrefixSumTable, fam: &ResolvedFamily) -> ScanResult {
    let d = table.dim();
    let mut best_v = f64::NEG_INFINITY;
    let mut best_sides: Vec<usize> = Vec::new();
    let mut best_origin: Vec<usize> = Vec::new();
    let scanned = sweep(table, fam, |sides, origin, raw, inv| {
        let (j, v) = first_argmax(raw);
        let v = v * inv;
        if v > best_v {
            best_v = v;
            best_sides.clear();
            best_sides.extend_from_slice(sides);
            best_origin.clear();
            best_origin.extend_from_slice(origin);
            best_origin[d - 1] = j;
        }
    });
    ScanResult {
        max_value: best_v,
        argmax: Window { origin: best_origin, sides: best_sides },
        windows_scanned: scanned,
    }
}

/// Maximum over any family kind.
pub fn scan(table: &PrefixSumTable, family: &WindowFamily) -> Result<ScanResult> {
    let fam = family.resolve(table.dims())?;
    Ok(scan_resolved(table, &fam))
}

/// Maximum over all cubes with side in `[side_min, side_max]`.
pub fn scan_cubes(table: &PrefixSumTable, side_min: usize, side_max: usize) -> Result<ScanResult> {
    scan(table, &WindowFamily::cubes(table.dim(), side_min, Some(side_max)))
}

/// Maximum over all rectangles with per-axis side bounds.
pub fn scan_rects(table: &PrefixSumTable, side_min: &[usize], side_max: &[usize]) -> Result<ScanResult> {
    if side_min.len() != table.dim() || side_max.len() != table.dim() {
        return Err(Error::InvalidFamily("side bounds must have one entry per axis".into()));
    }
    scan(table, &WindowFamily::rects(side_min.to_vec(), Some(side_max.to_vec())))
}

/// Maximum of the standardized grid white noise over a grid family.
///
/// A lattice value is the white-noise mass of one `q^d` cell divided by
/// `q^{d/2}`, so `W(A)/sqrt(|A|) = S(A)/sqrt(#cells)` and the discrete scan
/// applies unchanged.
pub fn scan_grid(table: &PrefixSumTable, family: &WindowFamily) -> Result<ScanResult> {
    if !family.kind.is_grid() {
        return Err(Error::InvalidFamily("scan_grid needs a grid family".into()));
    }
    scan(table, family)
}

/// Oracle: the same maximum by direct summation of every window.
pub fn scan_naive(field: &GaussianLatticeField, family: &WindowFamily) -> Result<ScanResult> {
    let cells: usize = field.dims().iter().product();
    if cells > NAIVE_CELL_LIMIT {
        return Err(Error::Oversize { cells, limit: NAIVE_CELL_LIMIT });
    }
    let fam = family.resolve(field.dims())?;
    let d = field.dim();
    let mut best: Option<(f64, Window)> = None;
    let mut scanned = 0u64;
    for sides in fam.side_vectors() {
        let counts = fam.origin_counts(&sides);
        if counts.contains(&0) {
            continue;
        }
        let mut origin = vec![0usize; d];
        'origins: loop {
            let w = Window { origin: origin.clone(), sides: sides.clone() };
            let v = field.direct_sum(&w)? / libm::sqrt(w.cardinality() as f64);
            scanned += 1;
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, w));
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    break 'origins;
                }
                axis -= 1;
                origin[axis] += 1;
                if origin[axis] < counts[axis] {
                    break;
                }
                origin[axis] = 0;
            }
        }
    }
    let (max_value, argmax) = best.ok_or_else(|| Error::InvalidFamily("family contains no windows".into()))?;
    Ok(ScanResult { max_value, argmax, windows_scanned: scanned })
}

/// Per-block maxima of `S(A)/sqrt(|A|)`, where a window belongs to the
/// block containing its origin and blocks tile origin space with side
/// `block` (boundary blocks truncated).
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMaxima {
    pub block: usize,
    /// Number of blocks per axis.
    pub grid: Vec<usize>,
    /// Row-major block maxima; `-inf` for blocks that hold no window.
    pub maxima: Vec<f64>,
}

impl BlockMaxima {
    pub fn count_above(&self, threshold: f64) -> usize {
        self.maxima.iter().filter(|&&m| m > threshold).count()
    }
}

pub fn block_maxima(table: &PrefixSumTable, family: &WindowFamily, block: usize) -> Result<BlockMaxima> {
    if block == 0 {
        return Err(Error::InvalidFamily("block side must be positive".into()));
    }
    let fam = family.resolve(table.dims())?;
    let d = table.dim();
    let grid: Vec<usize> = fam.dims.iter().zip(&fam.origin_hi).map(|(&n, &o)| (o.min(n - 1)) / block + 1).collect();
    let gstr = crate::field::strides(&grid);
    let mut maxima = vec![f64::NEG_INFINITY; grid.iter().product()];
    sweep(table, &fam, |_, origin, raw, inv| {
        let outer: usize = (0..d - 1).map(|i| origin[i] / block * gstr[i]).sum();
        for (k, chunk) in raw.chunks(block).enumerate() {
            let m = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max) * inv;
            let slot = &mut maxima[outer + k];
            if m > *slot {
                *slot = m;
            }
        }
    });
    Ok(BlockMaxima { block, grid, maxima })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_of(dims: &[usize], v: &[f64]) -> (GaussianLatticeField, PrefixSumTable) {
        let f = GaussianLatticeField::from_values(dims, v.to_vec()).unwrap();
        let t = PrefixSumTable::build(&f);
        (f, t)
    }

    #[test]
    fn zero_field() {
        let f = GaussianLatticeField::zeros(&[4, 4]).unwrap();
        let t = PrefixSumTable::build(&f);
        let r = scan_cubes(&t, 1, 4).unwrap();
        assert_eq!(r.max_value, 0.0);
        assert_eq!(r.argmax, Window { origin: vec![0, 0], sides: vec![1, 1] });
        assert_eq!(scan_rects(&t, &[1, 1], &[4, 4]).unwrap().max_value, 0.0);
        let g = WindowFamily::grid(true, &[0.5], &[1.0], 0.25).unwrap();
        assert_eq!(scan_grid(&t, &g).unwrap().max_value, 0.0);
        assert_eq!(scan_naive(&f, &WindowFamily::cubes(2, 1, None)).unwrap().max_value, 0.0);
    }

    #[test]
    fn one_dimensional_enumeration() {
        let (_, t) = table_of(&[3], &[3.0, -1.0, 2.0]);
        let r = scan_cubes(&t, 1, 3).unwrap();
        assert_eq!(r.max_value, 3.0);
        assert_eq!(r.argmax, Window { origin: vec![0], sides: vec![1] });
        assert_eq!(r.windows_scanned, 6);
    }

    #[test]
    fn two_by_two_rects() {
        let (_, t) = table_of(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let r = scan_rects(&t, &[1, 1], &[2, 2]).unwrap();
        assert_eq!(r.max_value, 5.0);
        assert_eq!(r.argmax, Window { origin: vec![0, 0], sides: vec![2, 2] });
        assert_eq!(r.windows_scanned, 9);
    }

    #[test]
    fn single_cell() {
        let (f, t) = table_of(&[1], &[-0.7]);
        assert_eq!(scan_naive(&f, &WindowFamily::cubes(1, 1, None)).unwrap().max_value, -0.7);
        assert_eq!(scan_cubes(&t, 1, 1).unwrap().max_value, -0.7);
    }

    #[test]
    fn bad_families() {
        let (f, t) = table_of(&[3, 3], &[0.0; 9]);
        assert!(matches!(scan_cubes(&t, 0, 2), Err(Error::InvalidFamily(_))));
        assert!(matches!(scan_cubes(&t, 3, 2), Err(Error::InvalidFamily(_))));
        assert!(matches!(scan_cubes(&t, 1, 4), Err(Error::InvalidFamily(_))));
        assert!(matches!(scan_rects(&t, &[1, 1], &[3, 4]), Err(Error::InvalidFamily(_))));
        assert!(matches!(WindowFamily::grid(false, &[1.0], &[2.0], 0.0), Err(Error::InvalidFamily(_))));
        let mut g = WindowFamily::grid(false, &[1.0, 1.0], &[2.0, 2.0], 1.0).unwrap();
        g.grid_step = -1.0;
        assert!(matches!(scan_grid(&t, &g), Err(Error::InvalidFamily(_))));
        assert!(scan_grid(&t, &WindowFamily::cubes(2, 1, None)).is_err());
        let big = GaussianLatticeField::zeros(&[101, 100]).unwrap();
        assert!(matches!(scan_naive(&big, &WindowFamily::cubes(2, 1, Some(1))), Err(Error::Oversize { .. })));
        let _ = f;
    }

    #[test]
    fn unit_grid_step_is_discrete() {
        let f = GaussianLatticeField::generate(&[7, 5], 4, 2).unwrap();
        let t = PrefixSumTable::build(&f);
        let g = WindowFamily::grid(true, &[2.0], &[4.0], 1.0).unwrap();
        assert_eq!(scan_grid(&t, &g).unwrap(), scan_cubes(&t, 2, 4).unwrap());
        let g = WindowFamily::grid(false, &[1.0, 2.0], &[3.0, 5.0], 1.0).unwrap();
        assert_eq!(scan_grid(&t, &g).unwrap(), scan_rects(&t, &[1, 2], &[3, 5]).unwrap());
    }

    #[test]
    fn grid_family_matches_brute_force() {
        let f = GaussianLatticeField::generate(&[64], 8, 0).unwrap();
        let t = PrefixSumTable::build(&f);
        let g = WindowFamily::grid(true, &[0.5], &[6.4], 0.1).unwrap();
        assert_eq!(g.side_min, vec![5]);
        let r = scan_grid(&t, &g).unwrap();
        let mut best = f64::NEG_INFINITY;
        for s in 5..=64 {
            for x in 0..=(64 - s) {
                let sum: f64 = f.values()[x..x + s].iter().sum();
                best = best.max(sum / libm::sqrt(s as f64));
            }
        }
        assert!((r.max_value - best).abs() < 1e-9);
    }

    #[test]
    fn origin_limit_and_blocks() {
        let f = GaussianLatticeField::generate(&[9, 7], 2, 1).unwrap();
        let t = PrefixSumTable::build(&f);
        let fam = WindowFamily::cubes(2, 2, Some(3));
        let blocks = block_maxima(&t, &fam, 3).unwrap();
        assert_eq!(blocks.grid, vec![3, 3]);
        let total = scan(&t, &fam).unwrap().max_value;
        let best = blocks.maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((total - best).abs() < 1e-12);
        // Block (1, 2) holds origins x in 3..6, y in 6..7.
        let mut expect = f64::NEG_INFINITY;
        for s in 2..=3 {
            for x in 3..6 {
                for y in 6..7 {
                    if x + s <= 9 && y + s <= 7 {
                        let w = Window::new(vec![x, y], vec![s, s]).unwrap();
                        expect = expect.max(t.standardized(&w).unwrap());
                    }
                }
            }
        }
        assert_eq!(blocks.maxima[3 + 2], expect);
        let limited = fam.clone().with_origin_max(vec![2, 2]);
        let r = scan(&t, &limited).unwrap();
        assert!(r.argmax.origin.iter().all(|&o| o <= 2));
        assert_eq!(r.windows_scanned, 2 * 9);
    }
}
