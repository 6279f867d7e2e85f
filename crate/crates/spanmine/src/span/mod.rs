//! Span enumeration under length bounds.
//!
//! A span is a half-open token interval `[start, end)`. Enumeration order is
//! fixed: start ascending, then length ascending. That order is the tie-break
//! contract for every argmax downstream.

mod index;
mod pool;

pub use index::{build_span_index, RepresentationStrategy, SpanIndex, StorageMode};
pub use pool::{build_prefix, endpoint_concat, mean_pool, PrefixMatrix};

use crate::error::{Error, Result};

/// Minimum/maximum span length bounds (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanConfig {
    min_size: usize,
    max_size: usize,
}

impl SpanConfig {
    pub fn new(min_size: usize, max_size: usize) -> Result<Self> {
        if min_size < 1 || min_size > max_size {
            return Err(Error::InvalidConfig(format!(
                "span sizes must satisfy 1 <= min <= max, got [{min_size}, {max_size}]"
            )));
        }
        Ok(Self { min_size, max_size })
    }

    /// Evaluation default: single word up to 20-token spans.
    pub fn evaluation() -> Self {
        Self {
            min_size: 1,
            max_size: 20,
        }
    }

    /// Training default: spans capped at 10 tokens.
    pub fn training() -> Self {
        Self {
            min_size: 1,
            max_size: 10,
        }
    }

    pub fn min_size(&self) -> usize {
        self.min_size
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }
}

impl Default for SpanConfig {
    fn default() -> Self {
        Self::evaluation()
    }
}

/// Half-open token interval within one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanRef {
    pub start: usize,
    pub end: usize,
}

impl SpanRef {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Iterates all spans of an `n`-token document with lengths in
/// `[cfg.min_size, cfg.max_size]`, start ascending then length ascending.
pub fn span_iter(n: usize, cfg: SpanConfig) -> impl Iterator<Item = SpanRef> {
    let (a, b) = (cfg.min_size, cfg.max_size);
    (0..n.saturating_sub(a - 1)).flat_map(move |start| {
        let longest = b.min(n - start);
        (a..=longest).map(move |len| SpanRef::new(start, start + len))
    })
}

/// Materialized [`span_iter`].
pub fn enumerate_spans(n: usize, cfg: SpanConfig) -> Vec<SpanRef> {
    span_iter(n, cfg).collect()
}

/// Closed-form span count: sum over k in [a, min(b, n)] of (n - k + 1).
pub fn span_count(n: usize, cfg: SpanConfig) -> usize {
    let a = cfg.min_size;
    let b = cfg.max_size.min(n);
    if b < a {
        return 0;
    }
    (a..=b).map(|k| n - k + 1).sum()
}
