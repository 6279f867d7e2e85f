//! Worker-pool management.
//!
//! `SPANMINE_THREADS` caps parallelism for corpus scans and record
//! evaluation. Unset, zero, or unparsable values fall back to one worker per
//! logical CPU. All parallel sections reduce in a fixed order, so results do
//! not depend on the worker count.

use std::sync::OnceLock;

pub const THREADS_ENV: &str = "SPANMINE_THREADS";

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

fn configured_threads() -> usize {
    match std::env::var(THREADS_ENV) {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(0) | Err(_) => {
                log::warn!("ignoring invalid {THREADS_ENV}={raw:?}");
                0
            }
            Ok(n) => n,
        },
        Err(_) => 0,
    }
}

/// The shared pool, built on first use.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(configured_threads())
            .build()
            .expect("failed to build worker pool")
    })
}

/// Runs `f` inside the shared pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    thread_pool().install(f)
}
