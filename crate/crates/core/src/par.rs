//! Index-ordered data parallelism.
//!
//! With the `parallel` feature (default) the helpers fan work out over
//! rayon; without it they run sequentially. Results always come back in
//! index order, so anything aggregated from them is schedule-independent.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..count).map(f)` collected in index order, possibly in parallel.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    map_indexed_seq(count, f)
}

/// Sequential reference path; always available.
pub fn map_indexed_seq<T, F>(count: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..count).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the error of the lowest failing
/// index wins, independent of scheduling.
pub fn try_map_indexed<T, E, F>(count: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    map_indexed(count, f).into_iter().collect()
}

/// Runs `f` on a pool of `workers` threads (0 = rayon default).
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
