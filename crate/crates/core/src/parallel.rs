//! Order-preserving parallel map. Falls back to a serial loop when the
//! `parallel` feature is off (e.g. the wasm build).

/// Maps `f` over `0..n`, returning results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Worker count requested through `GFACS_THREADS`, if set and positive.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("GFACS_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `f` inside a pool of `threads` workers (`None` = rayon default).
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T>(_threads: Option<usize>, f: impl FnOnce() -> T) -> T {
    f()
}
