//! Encoders and per-token embedding matrices.
//!
//! An encoder maps text to one contextualized vector per token. Three
//! implementations are provided: a deterministic toy encoder for end-to-end
//! runs at desk scale, a static word-vector lookup, and a bridge to external
//! encoder processes speaking the line-delimited exchange protocol.

pub mod external;
pub mod static_vectors;
pub mod toy;

use crate::error::{Error, Result};
use crate::text::TokenSequence;

pub use external::ExternalEncoder;
pub use static_vectors::StaticVectorEncoder;
pub use toy::{ToyEncoder, ToyEncoderParams};

/// Per-token embedding rows for one document, stored row-major as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    doc_id: String,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from flat row-major data, rejecting NaN/Inf entries.
    pub fn new(doc_id: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be > 0".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            doc_id: doc_id.into(),
            dim,
            data,
        })
    }

    pub fn from_rows(doc_id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(doc_id, dim, data)
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn with_doc_id(mut self, doc_id: impl Into<String>) -> Self {
        self.doc_id = doc_id.into();
        self
    }

    /// Number of token rows.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mean of all rows at 64-bit precision. Errors on an empty matrix.
    pub fn mean_row(&self) -> Result<Vec<f64>> {
        let n = self.len();
        if n == 0 {
            return Err(Error::EmptyInput("embedding matrix has no rows"));
        }
        let mut acc = vec![0.0f64; self.dim];
        for row in self.rows() {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += f64::from(v);
            }
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        Ok(acc)
    }
}

/// A text-to-embeddings encoder. Implementations are immutable after
/// construction and safe to share across threads.
pub trait Encoder: Send + Sync {
    /// Stable identifier echoed into reports (`toy`, `static:<path>`, ...).
    fn id(&self) -> String;

    /// Output dimension per token, when known up front (protocol encoders
    /// learn it from their first response).
    fn dim(&self) -> Option<usize>;

    /// Encodes one text into aligned tokens and embedding rows.
    fn encode(&self, text: &str) -> Result<(TokenSequence, EmbeddingMatrix)>;

    /// Encodes a batch. The default loops over [`Encoder::encode`]; protocol
    /// encoders override this to ship one request batch per call.
    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<(TokenSequence, EmbeddingMatrix)>> {
        texts.iter().map(|t| self.encode(t)).collect()
    }
}

/// Parses an encoder selector: `toy`, `static:<path>`, or `extern:<command>`.
pub fn build_encoder(selector: &str, seed: u64) -> Result<Box<dyn Encoder>> {
    if selector == "toy" {
        return Ok(Box::new(ToyEncoder::new(ToyEncoderParams::seeded(seed))));
    }
    if let Some(path) = selector.strip_prefix("static:") {
        return Ok(Box::new(StaticVectorEncoder::from_path(path)?));
    }
    if let Some(cmd) = selector.strip_prefix("extern:") {
        return Ok(Box::new(ExternalEncoder::from_command_line(cmd)?));
    }
    Err(Error::InvalidConfig(format!(
        "unknown encoder selector '{selector}' (expected toy | static:<path> | extern:<cmd>)"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        let err = EmbeddingMatrix::new("d", 2, vec![0.0, 1.0, f32::NAN, 2.0]);
        match err {
            Err(Error::NonFinite { row: 1, col: 0 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(EmbeddingMatrix::from_rows("d", &[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn mean_row_averages_at_f64() {
        let m = EmbeddingMatrix::from_rows("d", &[vec![1.0, 3.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(m.mean_row().unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn selector_parsing() {
        assert!(build_encoder("toy", 1).is_ok());
        assert!(build_encoder("bogus", 1).is_err());
        assert!(build_encoder("static:/no/such/file", 1).is_err());
    }
}
