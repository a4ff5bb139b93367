//! Trial fan-out across a worker pool.
//!
//! The pool size is capped by the `TRACE_SKETCH_THREADS` environment
//! variable when set. Results are collected by trial index and each trial
//! derives its own seed, so output is identical for any worker count.

use std::sync::OnceLock;

use rayon::prelude::*;
use rayon::ThreadPool;

pub const THREADS_ENV_VAR: &str = "TRACE_SKETCH_THREADS";

fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var(THREADS_ENV_VAR)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build worker pool")
    })
}

/// Map `f` over trial indices `0..trials` in parallel, preserving order.
pub fn run_trials<T: Send>(trials: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    pool().install(|| (0..trials).into_par_iter().map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_trial_order() {
        let out = run_trials(100, |i| i * i);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }
}
