//! File formats, a thread pool, a constant cache and the command line for
//! `gauss-scan-core`.

pub mod cache;
pub mod cli;
pub mod pool;
pub mod report;
pub mod resolve;

pub use cli::{execute, run, RunConfig, Runtime};
pub use pool::ThreadPool;
pub use report::Report;
