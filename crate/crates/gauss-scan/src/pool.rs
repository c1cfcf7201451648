//! A scoped-thread [`Executor`].

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gauss_scan_core::Executor;

/// Items handed to a worker per grab. Small enough to balance uneven
/// replications, large enough to keep the counter cold.
const CHUNK: usize = 4;

/// Runs items on `workers` scoped threads. Items are claimed dynamically,
/// but every result is stored at its own index, so the output never
/// depends on the schedule.
#[derive(Clone, Copy, Debug)]
pub struct ThreadPool {
    workers: usize,
}

impl ThreadPool {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }

    /// One worker per available core.
    pub fn available() -> Self {
        Self::new(std::thread::available_parallelism().map_or(1, NonZeroUsize::get))
    }
}

impl Executor for ThreadPool {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let threads = self.workers.min(count.div_ceil(CHUNK));
        if threads <= 1 {
            return (0..count).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let start = next.fetch_add(CHUNK, Ordering::Relaxed);
                    if start >= count {
                        break;
                    }
                    let end = (start + CHUNK).min(count);
                    let done: Vec<T> = (start..end).map(&f).collect();
                    let mut guard = slots.lock().unwrap_or_else(|e| e.into_inner());
                    for (i, v) in (start..end).zip(done) {
                        guard[i] = Some(v);
                    }
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .into_iter()
            .map(|v| v.expect("every index is claimed exactly once"))
            .collect()
    }

    fn workers(&self) -> usize {
        self.workers
    }
}
