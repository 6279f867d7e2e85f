//! Span representations: prefix-sum mean pooling and endpoint concatenation.
//!
//! Prefix sums make mean pooling O(dim) per span instead of O(len * dim).
//! Accumulation runs in f64 because differencing cumulative sums is
//! cancellation-prone at f32.

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

use super::SpanRef;

/// `(n + 1) x dim` cumulative sums of an embedding matrix; row 0 is zero.
#[derive(Debug, Clone)]
pub struct PrefixMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl PrefixMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of prefix rows (`n + 1` for an `n`-row matrix).
    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Writes the mean of embedding rows `[span.start, span.end)` into `out`.
    pub fn mean_into(&self, span: SpanRef, out: &mut [f64]) -> Result<()> {
        if span.is_empty() {
            return Err(Error::EmptySpan {
                start: span.start,
                end: span.end,
            });
        }
        let n = self.rows() - 1;
        if span.end > n {
            return Err(Error::SpanOutOfBounds {
                start: span.start,
                end: span.end,
                len: n,
            });
        }
        let inv_len = 1.0 / span.len() as f64;
        let hi = self.row(span.end);
        let lo = self.row(span.start);
        for ((o, &h), &l) in out.iter_mut().zip(hi).zip(lo) {
            *o = (h - l) * inv_len;
        }
        Ok(())
    }
}

/// Builds cumulative sums in 64-bit accumulation.
pub fn build_prefix(m: &EmbeddingMatrix) -> PrefixMatrix {
    let dim = m.dim();
    let mut data = vec![0.0f64; (m.len() + 1) * dim];
    for (i, row) in m.rows().enumerate() {
        let (prev, rest) = data.split_at_mut((i + 1) * dim);
        let prev = &prev[i * dim..];
        for (j, &v) in row.iter().enumerate() {
            rest[j] = prev[j] + f64::from(v);
        }
    }
    PrefixMatrix { dim, data }
}

/// Mean of the span's embedding rows, via prefix differencing, at 64-bit
/// precision.
pub fn mean_pool(span: SpanRef, prefix: &PrefixMatrix) -> Result<Vec<f64>> {
    let mut out = vec![0.0f64; prefix.dim()];
    prefix.mean_into(span, &mut out)?;
    Ok(out)
}

/// Concatenation of the span's first and last token rows (dimension `2 * dim`).
pub fn endpoint_concat(span: SpanRef, m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    if span.is_empty() {
        return Err(Error::EmptySpan {
            start: span.start,
            end: span.end,
        });
    }
    if span.end > m.len() {
        return Err(Error::SpanOutOfBounds {
            start: span.start,
            end: span.end,
            len: m.len(),
        });
    }
    let mut out = Vec::with_capacity(2 * m.dim());
    out.extend(m.row(span.start).iter().map(|&v| f64::from(v)));
    out.extend(m.row(span.end - 1).iter().map(|&v| f64::from(v)));
    Ok(out)
}
