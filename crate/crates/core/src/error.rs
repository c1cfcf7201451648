use core::fmt;

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Zero extent, zero dimensions, or a lattice too large to address.
    InvalidDimension(String),
    /// A window that does not fit inside the lattice.
    OutOfBounds(String),
    /// Side bounds, grid step or origin limits that describe no windows.
    InvalidFamily(String),
    /// Naive scan refused because the lattice exceeds the oracle guard.
    Oversize { cells: usize, limit: usize },
    /// Argument outside the domain of a formula.
    Domain(String),
    /// Grid horizon not aligned with the grid step.
    Alignment { horizon: f64, step: f64 },
    /// A setting does not support the requested operation.
    NotApplicable(String),
    /// Missing or inconsistent experiment configuration.
    Config(String),
    /// The configuration cannot produce a meaningful estimate.
    Underpowered(String),
}

impl Error {
    /// True for errors caused by the caller's configuration rather than by
    /// what happened while running.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::Underpowered(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension(m) => write!(f, "invalid dimension: {m}"),
            Error::OutOfBounds(m) => write!(f, "window out of bounds: {m}"),
            Error::InvalidFamily(m) => write!(f, "invalid window family: {m}"),
            Error::Oversize { cells, limit } => {
                write!(f, "lattice of {cells} cells exceeds naive-scan limit {limit}")
            }
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Alignment { horizon, step } => {
                write!(f, "horizon {horizon} is not a multiple of grid step {step}")
            }
            Error::NotApplicable(m) => write!(f, "not applicable: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Underpowered(m) => write!(f, "underpowered configuration: {m}"),
        }
    }
}

impl core::error::Error for Error {}
