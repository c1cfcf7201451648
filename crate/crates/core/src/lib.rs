//! Maxima of standardized Gaussian window sums `S(A)/sqrt(|A|)` over
//! families of lattice cubes and rectangles, together with the extreme-value
//! normalizers, the Pickands-type constants they depend on, and Monte Carlo
//! harnesses that check the Gumbel and Poisson limits.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, threads or a command line lives in the `gauss-scan` crate.

#![no_std]
// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Multi-axis index arithmetic reads better with explicit indices.
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod constants;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod field;
pub mod quad;
pub mod rng;
pub mod scan;
pub mod special;
pub mod theory;

pub use error::{Error, Result};
pub use exec::{Executor, Serial};
pub use field::{GaussianLatticeField, PrefixSumTable, Window};
pub use scan::{ScanResult, WindowFamily, WindowKind};
