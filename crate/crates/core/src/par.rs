//! Order-preserving parallel helpers.
//!
//! Every parallel reduction in this crate maps independent work items to an
//! index-ordered `Vec` of partial results and combines them sequentially.
//! That keeps floating-point sums bit-identical across thread counts and to
//! the sequential fallback compiled with `--no-default-features`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order in the output.
#[cfg(feature = "parallel")]
pub(crate) fn ordered_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn ordered_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Sequential variant kept unconditionally, so benchmarks can compare the
/// rayon path against the fallback inside one build.
pub(crate) fn ordered_map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
