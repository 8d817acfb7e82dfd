//! Per-row data parallelism inside a single rank.
//!
//! With the `parallel` feature the helpers fan out over rayon's pool; without
//! it, or after `set_parallel(false)`, they run sequentially. Every helper
//! returns results in row order and reductions go through exact accumulators,
//! so both paths produce identical bits.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Rows below this count are always processed sequentially.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_ROWS: usize = 256;

/// Enables or disables the rayon path at runtime. A no-op when the crate is
/// built without the `parallel` feature.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled && cfg!(feature = "parallel"), Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// Maps `f(row_index, row)` over the `dim`-wide rows of `flat`.
pub fn map_rows<T, F>(flat: &[f64], dim: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &[f64]) -> T + Sync + Send,
{
    debug_assert!(dim > 0 && flat.len().is_multiple_of(dim));
    #[cfg(feature = "parallel")]
    if is_parallel() && flat.len() / dim >= MIN_PARALLEL_ROWS {
        return flat
            .par_chunks_exact(dim)
            .enumerate()
            .map(|(i, row)| f(i, row))
            .collect();
    }
    flat.chunks_exact(dim)
        .enumerate()
        .map(|(i, row)| f(i, row))
        .collect()
}

/// Maps `f` over `0..len`.
pub fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && len >= MIN_PARALLEL_ROWS {
        return (0..len).into_par_iter().map(f).collect();
    }
    (0..len).map(f).collect()
}
