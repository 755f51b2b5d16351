//! Benchmark instances, sweeps over `(n, seed, method)` and ground-truth
//! diagnostics.

pub mod cb;
pub mod config;
pub mod instances;
pub mod report;
pub mod results;
pub mod rl;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Core(#[from] modbe_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("could not start worker threads: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

/// A pool with `jobs` workers (at least one).
pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, EvalError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}
