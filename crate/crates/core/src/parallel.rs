//! Bounded fan-out of independent tasks.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable that overrides the worker count wherever a caller
/// passes `None`.
pub const WORKERS_ENV: &str = "HETMR_WORKERS";

/// `requested`, else `HETMR_WORKERS`, else the number of available cores.
pub fn resolve_workers(requested: Option<usize>) -> Result<usize> {
    if let Some(n) = requested {
        return if n == 0 {
            Err(Error::Config("worker count must be >= 1".into()))
        } else {
            Ok(n)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(text) => match text.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "{WORKERS_ENV}={text:?} is not a positive integer"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `task(0..n)` on at most `workers` threads and returns results in index
/// order, so the output never depends on scheduling.
pub fn map_indexed<T, F>(workers: usize, n: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 || n <= 1 {
        return Ok((0..n).map(task).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.min(n))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(task).collect()))
}
