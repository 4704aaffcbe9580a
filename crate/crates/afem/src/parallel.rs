//! Element-parallel map helper.
//!
//! Assembly and indicator evaluation are data-parallel over elements. Results
//! are collected in element order and scattered sequentially afterwards, so
//! parallel and sequential execution are bitwise identical.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential code path even when the `parallel` feature is active.
pub fn set_sequential(sequential: bool) {
    FORCE_SEQUENTIAL.store(sequential, Ordering::Relaxed);
}

pub fn is_sequential() -> bool {
    cfg!(not(feature = "parallel")) || FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Map `f` over `0..n`, preserving index order in the output.
pub fn map_elements<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !is_sequential() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    map_elements_seq(n, f)
}

/// Always-sequential variant, used by benches as the baseline.
pub fn map_elements_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
