//! Path-parallel execution.
//!
//! Each path is an independent job keyed by its index. Results are always
//! returned in index order, and every reduction downstream is a fixed-order
//! pairwise merge, so the worker count never changes a result.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

#[derive(Clone, Default)]
pub struct Executor {
    mode: Mode,
}

#[derive(Clone, Default)]
enum Mode {
    Serial,
    #[default]
    Global,
    Pool(Arc<ThreadPool>),
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.mode {
            Mode::Serial => write!(f, "Executor(serial)"),
            Mode::Global => write!(f, "Executor(global)"),
            Mode::Pool(p) => write!(f, "Executor({} threads)", p.current_num_threads()),
        }
    }
}

impl Executor {
    pub fn serial() -> Self {
        Executor { mode: Mode::Serial }
    }

    /// Rayon's global pool.
    pub fn global() -> Self {
        Executor { mode: Mode::Global }
    }

    pub fn with_threads(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("thread count must be positive"));
        }
        if n == 1 {
            return Ok(Self::serial());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
        Ok(Executor { mode: Mode::Pool(Arc::new(pool)) })
    }

    pub fn threads(&self) -> usize {
        match &self.mode {
            Mode::Serial => 1,
            Mode::Global => rayon::current_num_threads(),
            Mode::Pool(p) => p.current_num_threads(),
        }
    }

    /// Evaluate `job(i)` for `i in 0..n`, returning results in index order.
    pub fn map_paths<T, F>(&self, n: u64, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match &self.mode {
            Mode::Serial => (0..n).map(job).collect(),
            Mode::Global => (0..n).into_par_iter().map(job).collect(),
            Mode::Pool(p) => p.install(|| (0..n).into_par_iter().map(&job).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_in_index_order() {
        for ex in [Executor::serial(), Executor::with_threads(4).unwrap()] {
            let v = ex.map_paths(1000, |i| i * i);
            assert!(v.iter().enumerate().all(|(i, &x)| x == (i as u64) * (i as u64)));
        }
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(Executor::with_threads(0).is_err());
    }
}
