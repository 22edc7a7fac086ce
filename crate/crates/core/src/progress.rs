//! Polling handle for long-running computations.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use serde::Serialize;

#[derive(Debug, Default)]
struct Inner {
    cancelled: AtomicBool,
    iteration: AtomicU64,
    delta_bits: AtomicU64,
    done: AtomicU64,
    total: AtomicU64,
}

/// Shared between a worker and any number of observers. Cloning is cheap.
#[derive(Debug, Clone, Default)]
pub struct Progress(Arc<Inner>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgressSnapshot {
    pub iteration: u64,
    pub delta: f64,
    pub done: u64,
    pub total: u64,
    pub cancelled: bool,
}

impl Progress {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.cancelled.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.cancelled.load(Ordering::Relaxed)
    }

    pub fn set_iteration(&self, iteration: u64, delta: f64) {
        self.0.iteration.store(iteration, Ordering::Relaxed);
        self.0.delta_bits.store(delta.to_bits(), Ordering::Relaxed);
    }

    pub fn set_total(&self, total: u64) {
        self.0.total.store(total, Ordering::Relaxed);
    }

    pub fn advance(&self) {
        self.0.done.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> ProgressSnapshot {
        ProgressSnapshot {
            iteration: self.0.iteration.load(Ordering::Relaxed),
            delta: f64::from_bits(self.0.delta_bits.load(Ordering::Relaxed)),
            done: self.0.done.load(Ordering::Relaxed),
            total: self.0.total.load(Ordering::Relaxed),
            cancelled: self.is_cancelled(),
        }
    }
}
