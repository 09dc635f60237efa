//! Pluggable per-sample execution.
//!
//! The core crate has no threads. Callers that do (the CLI uses a rayon pool)
//! implement [`SampleMap`] and hand it to the training loop; results must come back
//! in index order so that reductions stay bit-reproducible.

use alloc::vec::Vec;

pub trait SampleMap {
    fn map<T: Send>(&self, count: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T>;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl SampleMap for Sequential {
    fn map<T: Send>(&self, count: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        (0..count).map(f).collect()
    }
}
