//! Indexed worker pool. Work items are evaluated in any order and results
//! are placed by index, so output never depends on scheduling.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Environment variable supplying the default worker count.
pub const WORKERS_ENV: &str = "ATOMWALK_WORKERS";

pub struct Workers {
    pool: ThreadPool,
    count: usize,
}

impl Workers {
    pub fn new(count: usize) -> Self {
        let count = count.max(1);
        let pool = ThreadPoolBuilder::new()
            .num_threads(count)
            .thread_name(|i| format!("atomwalk-worker-{i}"))
            .build()
            .expect("failed to build worker pool");
        Self { pool, count }
    }

    /// Worker count from `ATOMWALK_WORKERS`, else the number of available
    /// CPUs.
    pub fn from_env() -> Self {
        Self::new(default_worker_count())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Evaluates `f(0..n)` on the pool; `out[i] == f(i)`.
    pub fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..n).into_par_iter().map(&f).collect())
    }
}

pub fn default_worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_placed_by_index() {
        for workers in [1, 3, 8] {
            let w = Workers::new(workers);
            let out = w.map_indexed(100, |i| i * i);
            assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_workers_means_one() {
        assert_eq!(Workers::new(0).count(), 1);
    }
}
