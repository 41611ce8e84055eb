//! Replicate execution and seed derivation.
//!
//! Everything replicated in this crate (bootstrap draws, refuter replicates,
//! forest trees, grid cells) goes through [`map_replicates`]. With the
//! `parallel` feature it fans out over rayon; without it the loop is
//! sequential. Results are identical in both modes because each replicate
//! seeds its own RNG via [`derive_seed`] instead of sharing a stream.

/// splitmix64 finalizer; good enough to decorrelate consecutive streams.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for replicate `stream` of a computation with the given master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// Runs `f(0..n)` and collects the results in index order.
#[cfg(feature = "parallel")]
pub fn map_replicates<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Runs `f(0..n)` and collects the results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_replicates<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_replicates_seq(n, f)
}

/// Sequential reference path, always available (used by the benches to
/// compare against the rayon path).
pub fn map_replicates_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
