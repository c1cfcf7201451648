//! Gaussian lattice fields and prefix-sum tables.
//!
//! Lattices are stored row-major (last axis contiguous). A window is the
//! half-open index box `[origin, origin + sides)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Largest lattice accepted, in cells.
pub const MAX_CELLS: usize = 1 << 31;

fn checked_cells(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidDimension("lattice needs at least one axis".into()));
    }
    let mut cells = 1usize;
    for (axis, &n) in dims.iter().enumerate() {
        if n == 0 {
            return Err(Error::InvalidDimension(format!("axis {axis} has zero extent")));
        }
        cells = cells
            .checked_mul(n)
            .filter(|&c| c <= MAX_CELLS)
            .ok_or_else(|| Error::InvalidDimension(format!("more than {MAX_CELLS} cells")))?;
    }
    Ok(cells)
}

/// Row-major strides for the given extents.
pub(crate) fn strides(extents: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; extents.len()];
    for i in (0..extents.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * extents[i + 1];
    }
    s
}

/// i.i.d. standard normal values on a finite box of `Z^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLatticeField {
    dims: Vec<usize>,
    values: Vec<f64>,
    seed: u64,
    stream_id: u64,
}

impl GaussianLatticeField {
    /// Draws `prod(dims)` normals from stream `(seed, stream_id)`.
    pub fn generate(dims: &[usize], seed: u64, stream_id: u64) -> Result<Self> {
        let cells = checked_cells(dims)?;
        let mut values = vec![0.0; cells];
        StreamRng::new(seed, stream_id).fill_normal(&mut values);
        Ok(Self { dims: dims.to_vec(), values, seed, stream_id })
    }

    /// Wraps explicit values (seed and stream are recorded as zero).
    pub fn from_values(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        let cells = checked_cells(dims)?;
        if values.len() != cells {
            return Err(Error::InvalidDimension(format!("{} values for a lattice of {cells} cells", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDimension("non-finite lattice value".into()));
        }
        Ok(Self { dims: dims.to_vec(), values, seed: 0, stream_id: 0 })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let cells = checked_cells(dims)?;
        Self::from_values(dims, vec![0.0; cells])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Field with every value negated.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = -*v);
        out
    }

    /// Sum over a window by direct enumeration of its cells.
    pub fn direct_sum(&self, w: &Window) -> Result<f64> {
        w.check_inside(&self.dims)?;
        let st = strides(&self.dims);
        let d = self.dims.len();
        let mut idx = vec![0usize; d];
        let mut total = 0.0;
        loop {
            let flat: usize = (0..d).map(|i| (w.origin[i] + idx[i]) * st[i]).sum();
            total += self.values[flat];
            let mut axis = d;
            loop {
                if axis == 0 {
                    return Ok(total);
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < w.sides[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

/// Half-open index box `{z : origin_i <= z_i < origin_i + sides_i}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Window {
    pub origin: Vec<usize>,
    pub sides: Vec<usize>,
}

impl Window {
    pub fn new(origin: Vec<usize>, sides: Vec<usize>) -> Result<Self> {
        if origin.len() != sides.len() || origin.is_empty() {
            return Err(Error::InvalidDimension(format!(
                "origin has {} axes, sides has {}",
                origin.len(),
                sides.len()
            )));
        }
        if sides.contains(&0) {
            return Err(Error::InvalidDimension("window side must be at least 1".into()));
        }
        Ok(Self { origin, sides })
    }

    /// Number of cells, `|A|`.
    pub fn cardinality(&self) -> usize {
        self.sides.iter().product()
    }

    pub fn is_cube(&self) -> bool {
        self.sides.windows(2).all(|p| p[0] == p[1])
    }

    fn check_inside(&self, dims: &[usize]) -> Result<()> {
        if self.origin.len() != dims.len() {
            return Err(Error::OutOfBounds(format!(
                "window has {} axes, lattice has {}",
                self.origin.len(),
                dims.len()
            )));
        }
        for i in 0..dims.len() {
            if self.sides[i] == 0 || self.origin[i] + self.sides[i] > dims[i] {
                return Err(Error::OutOfBounds(format!(
                    "axis {i}: [{}, {}) not inside [0, {})",
                    self.origin[i],
                    self.origin[i] + self.sides[i],
                    dims[i]
                )));
            }
        }
        Ok(())
    }
}

/// Cumulative sums with one extra leading slot per axis:
/// `table[x] = sum of values[z] over 0 <= z < x`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixSumTable {
    dims: Vec<usize>,
    extents: Vec<usize>,
    strides: Vec<usize>,
    table: Vec<f64>,
}

impl PrefixSumTable {
    pub fn build(field: &GaussianLatticeField) -> Self {
        Self::build_counted(field).0
    }

    /// Builds the table and reports how many additions the axis passes made.
    pub(crate) fn build_counted(field: &GaussianLatticeField) -> (Self, usize) {
        let dims = field.dims.clone();
        let d = dims.len();
        let extents: Vec<usize> = dims.iter().map(|n| n + 1).collect();
        let tstr = strides(&extents);
        let mut table = vec![0.0; extents.iter().product()];

        // Scatter values to the shifted interior.
        let mut idx = vec![0usize; d];
        for &v in &field.values {
            let flat: usize = (0..d).map(|i| (idx[i] + 1) * tstr[i]).sum();
            table[flat] = v;
            for axis in (0..d).rev() {
                idx[axis] += 1;
                if idx[axis] < dims[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }

        let mut adds = 0usize;
        for axis in 0..d {
            let stride = tstr[axis];
            let len = extents[axis];
            // Every cell whose coordinate on `axis` is >= 1 accumulates its predecessor.
            let block = stride * len;
            for base in (0..table.len()).step_by(block) {
                for k in 1..len {
                    let row = base + k * stride;
                    let (head, tail) = table.split_at_mut(row);
                    let prev = &head[row - stride..row];
                    for (t, p) in tail[..stride].iter_mut().zip(prev) {
                        *t += *p;
                    }
                    adds += stride;
                }
            }
        }
        (Self { dims, extents, strides: tstr, table }, adds)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// Table extents (`dims_i + 1`).
    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.table
    }

    /// Table entry at a multi-index with `0 <= x_i <= dims_i`.
    pub fn at(&self, x: &[usize]) -> f64 {
        let flat: usize = x.iter().zip(&self.strides).map(|(a, s)| a * s).sum();
        self.table[flat]
    }

    /// Total of all lattice values.
    pub fn total(&self) -> f64 {
        *self.table.last().expect("table is never empty")
    }

    /// Flat offsets (relative to the origin corner) and signs of the `2^d`
    /// corners used by inclusion-exclusion for the given side vector.
    pub(crate) fn corner_offsets(&self, sides: &[usize]) -> Vec<(usize, f64)> {
        let d = self.dims.len();
        (0..1usize << d)
            .map(|mask| {
                let mut off = 0;
                let mut far = 0;
                for i in 0..d {
                    if mask >> i & 1 == 1 {
                        off += sides[i] * self.strides[i];
                        far += 1;
                    }
                }
                let sign = if (d - far).is_multiple_of(2) { 1.0 } else { -1.0 };
                (off, sign)
            })
            .collect()
    }

    /// `S(w)`, the sum of the field over `w`, from `2^d` table lookups.
    pub fn window_sum(&self, w: &Window) -> Result<f64> {
        w.check_inside(&self.dims)?;
        let base: usize = w.origin.iter().zip(&self.strides).map(|(a, s)| a * s).sum();
        Ok(self.corner_offsets(&w.sides).iter().map(|&(off, sign)| sign * self.table[base + off]).sum())
    }

    /// `S(w) / sqrt(|w|)`.
    pub fn standardized(&self, w: &Window) -> Result<f64> {
        Ok(self.window_sum(w)? / libm::sqrt(w.cardinality() as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism_and_streams() {
        let a = GaussianLatticeField::generate(&[4, 4], 1, 0).unwrap();
        let b = GaussianLatticeField::generate(&[4, 4], 1, 0).unwrap();
        assert_eq!(a.values().len(), 16);
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = GaussianLatticeField::generate(&[3], 1, 0).unwrap();
        let e = GaussianLatticeField::generate(&[3], 1, 1).unwrap();
        assert_ne!(c.values(), e.values());
    }

    #[test]
    fn invalid_dims() {
        assert!(matches!(GaussianLatticeField::generate(&[], 1, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(GaussianLatticeField::generate(&[3, 0], 1, 0), Err(Error::InvalidDimension(_))));
        assert!(GaussianLatticeField::generate(&[1 << 16, 1 << 16], 1, 0).is_err());
    }

    #[test]
    fn moments_of_a_million_draws() {
        let n = 1_000_000;
        let f = GaussianLatticeField::generate(&[n], 7, 0).unwrap();
        let mean = f.values().iter().sum::<f64>() / n as f64;
        let var = f.values().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / 1000.0, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn prefix_small_cases() {
        let f = GaussianLatticeField::from_values(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(PrefixSumTable::build(&f).as_slice(), &[0.0, 1.0, 3.0, 6.0]);
        let ones = GaussianLatticeField::from_values(&[2, 2], vec![1.0; 4]).unwrap();
        let t = PrefixSumTable::build(&ones);
        assert_eq!(t.at(&[2, 2]), 4.0);
        assert_eq!(t.at(&[0, 2]), 0.0);
        assert_eq!(t.at(&[2, 0]), 0.0);
    }

    #[test]
    fn window_sum_examples() {
        let f = GaussianLatticeField::from_values(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = PrefixSumTable::build(&f);
        let w = Window::new(vec![1, 0], vec![1, 2]).unwrap();
        assert_eq!(t.window_sum(&w).unwrap(), 7.0);
        let full = Window::new(vec![0, 0], vec![2, 2]).unwrap();
        assert_eq!(t.window_sum(&full).unwrap(), 10.0);
        let out = Window::new(vec![1, 1], vec![2, 1]).unwrap();
        assert!(matches!(t.window_sum(&out), Err(Error::OutOfBounds(_))));
    }

    #[test]
    fn corner_equals_total_3d() {
        let f = GaussianLatticeField::generate(&[5, 5, 5], 3, 9).unwrap();
        let t = PrefixSumTable::build(&f);
        let direct: f64 = f.values().iter().sum();
        assert!((t.total() - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn prefix_build_is_linear_per_axis() {
        for dims in [vec![17], vec![6, 9], vec![4, 5, 3], vec![2, 3, 2, 3]] {
            let f = GaussianLatticeField::generate(&dims, 1, 0).unwrap();
            let (t, adds) = PrefixSumTable::build_counted(&f);
            let cells = t.as_slice().len();
            assert!(adds <= dims.len() * cells, "{adds} additions for {cells} cells");
        }
    }
}
