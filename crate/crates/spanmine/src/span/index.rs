//! Searchable per-document span indexes.
//!
//! A [`SpanIndex`] answers span-vector lookups and full scans for one
//! document. Materialized mode stores every span vector (Θ(N·K) vectors);
//! lazy mode stores only the Θ(N) prefix rows and reconstructs vectors on
//! demand. Both modes keep per-span precomputed norms so scans can score
//! without re-deriving magnitudes.

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::text::TokenSequence;

use super::pool::{build_prefix, endpoint_concat, PrefixMatrix};
use super::{span_count, span_iter, SpanConfig, SpanRef};

/// How a span is turned into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepresentationStrategy {
    /// Mean of the span's token vectors (dimension `d`).
    MeanPool,
    /// First-token row concatenated with last-token row (dimension `2d`).
    EndpointConcat,
}

impl RepresentationStrategy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::MeanPool),
            "endpoint" => Ok(Self::EndpointConcat),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy '{other}' (expected mean | endpoint)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MeanPool => "mean",
            Self::EndpointConcat => "endpoint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    Materialized,
    Lazy,
}

impl StorageMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "materialized" => Ok(Self::Materialized),
            "lazy" => Ok(Self::Lazy),
            other => Err(Error::InvalidConfig(format!(
                "unknown storage mode '{other}' (expected materialized | lazy)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Materialized => "materialized",
            Self::Lazy => "lazy",
        }
    }
}

/// Immutable span index over one document.
#[derive(Debug, Clone)]
pub struct SpanIndex {
    doc_id: String,
    tokens: TokenSequence,
    config: SpanConfig,
    strategy: RepresentationStrategy,
    mode: StorageMode,
    matrix: EmbeddingMatrix,
    prefix: Option<PrefixMatrix>,
    /// Flat `span_count x rep_dim` vectors; empty in lazy mode.
    vectors: Vec<f64>,
    /// Euclidean norm of every span vector, in enumeration order.
    norms: Vec<f64>,
    /// `cum[s]` = number of spans starting before token `s`.
    cum: Vec<usize>,
}

/// Builds a span index over aligned tokens and embeddings.
pub fn build_span_index(
    tokens: &TokenSequence,
    matrix: &EmbeddingMatrix,
    config: SpanConfig,
    strategy: RepresentationStrategy,
    mode: StorageMode,
) -> Result<SpanIndex> {
    if tokens.len() != matrix.len() {
        return Err(Error::DimensionMismatch {
            expected: tokens.len(),
            actual: matrix.len(),
        });
    }
    let n = matrix.len();
    let total = span_count(n, config);

    let mut cum = Vec::with_capacity(n + 1);
    let mut running = 0usize;
    cum.push(0);
    for start in 0..n {
        let longest = config.max_size().min(n - start);
        if longest >= config.min_size() {
            running += longest - config.min_size() + 1;
        }
        cum.push(running);
    }
    debug_assert_eq!(running, total);

    let prefix = match strategy {
        RepresentationStrategy::MeanPool => Some(build_prefix(matrix)),
        RepresentationStrategy::EndpointConcat => None,
    };

    let rep_dim = match strategy {
        RepresentationStrategy::MeanPool => matrix.dim(),
        RepresentationStrategy::EndpointConcat => 2 * matrix.dim(),
    };

    let mut vectors = Vec::new();
    let mut norms = Vec::with_capacity(total);
    let mut scratch = vec![0.0f64; rep_dim];
    for span in span_iter(n, config) {
        fill_vector(span, strategy, prefix.as_ref(), matrix, &mut scratch)?;
        norms.push(scratch.iter().map(|v| v * v).sum::<f64>().sqrt());
        if mode == StorageMode::Materialized {
            vectors.extend_from_slice(&scratch);
        }
    }

    Ok(SpanIndex {
        doc_id: matrix.doc_id().to_string(),
        tokens: tokens.clone(),
        config,
        strategy,
        mode,
        matrix: matrix.clone(),
        prefix,
        vectors,
        norms,
        cum,
    })
}

fn fill_vector(
    span: SpanRef,
    strategy: RepresentationStrategy,
    prefix: Option<&PrefixMatrix>,
    matrix: &EmbeddingMatrix,
    out: &mut [f64],
) -> Result<()> {
    match strategy {
        RepresentationStrategy::MeanPool => prefix
            .expect("mean-pool index always builds a prefix")
            .mean_into(span, out),
        RepresentationStrategy::EndpointConcat => {
            let v = endpoint_concat(span, matrix)?;
            out.copy_from_slice(&v);
            Ok(())
        }
    }
}

impl SpanIndex {
    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn tokens(&self) -> &TokenSequence {
        &self.tokens
    }

    pub fn config(&self) -> SpanConfig {
        self.config
    }

    pub fn strategy(&self) -> RepresentationStrategy {
        self.strategy
    }

    pub fn mode(&self) -> StorageMode {
        self.mode
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    /// Dimension of span vectors (`d` for mean pooling, `2d` for endpoints).
    pub fn rep_dim(&self) -> usize {
        match self.strategy {
            RepresentationStrategy::MeanPool => self.matrix.dim(),
            RepresentationStrategy::EndpointConcat => 2 * self.matrix.dim(),
        }
    }

    pub fn span_count(&self) -> usize {
        self.norms.len()
    }

    /// Number of span vectors held in memory; zero in lazy mode.
    pub fn stored_vector_count(&self) -> usize {
        if self.rep_dim() == 0 {
            0
        } else {
            self.vectors.len() / self.rep_dim()
        }
    }

    pub fn spans(&self) -> impl Iterator<Item = SpanRef> {
        span_iter(self.tokens.len(), self.config)
    }

    /// Position of `span` in enumeration order, if admissible.
    pub fn ordinal(&self, span: SpanRef) -> Option<usize> {
        let n = self.tokens.len();
        if span.is_empty() || span.end > n {
            return None;
        }
        let len = span.len();
        if len < self.config.min_size() || len > self.config.max_size() {
            return None;
        }
        Some(self.cum[span.start] + (len - self.config.min_size()))
    }

    pub fn span_norm(&self, ordinal: usize) -> f64 {
        self.norms[ordinal]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// The span's vector, reconstructed in lazy mode or copied out of storage
    /// in materialized mode.
    pub fn span_vector(&self, span: SpanRef) -> Result<Vec<f64>> {
        let ord = self.ordinal(span).ok_or(Error::SpanOutOfBounds {
            start: span.start,
            end: span.end,
            len: self.tokens.len(),
        })?;
        let rep_dim = self.rep_dim();
        if self.mode == StorageMode::Materialized {
            return Ok(self.vectors[ord * rep_dim..(ord + 1) * rep_dim].to_vec());
        }
        let mut out = vec![0.0f64; rep_dim];
        fill_vector(span, self.strategy, self.prefix.as_ref(), &self.matrix, &mut out)?;
        Ok(out)
    }

    /// Full scan in enumeration order. The slice passed to `f` is a reused
    /// scratch buffer.
    pub fn for_each_span<F: FnMut(usize, SpanRef, &[f64])>(&self, mut f: F) -> Result<()> {
        let rep_dim = self.rep_dim();
        if self.mode == StorageMode::Materialized {
            for (ord, span) in self.spans().enumerate() {
                f(ord, span, &self.vectors[ord * rep_dim..(ord + 1) * rep_dim]);
            }
            return Ok(());
        }
        let mut scratch = vec![0.0f64; rep_dim];
        for (ord, span) in self.spans().enumerate() {
            fill_vector(span, self.strategy, self.prefix.as_ref(), &self.matrix, &mut scratch)?;
            f(ord, span, &scratch);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::toy::{base_vectors, ToyEncoderParams};
    use crate::text::tokenize;
    use proptest::prelude::*;

    fn fixture(n: usize) -> (TokenSequence, EmbeddingMatrix) {
        let text: Vec<String> = (0..n).map(|i| format!("tok{i}")).collect();
        let tokens = tokenize(&text.join(" "));
        let params = ToyEncoderParams::with_dims(6, 0, 5);
        let m = base_vectors(&tokens, &params).with_doc_id("fix");
        (tokens, m)
    }

    #[test]
    fn reports_span_count() {
        let (tokens, m) = fixture(3);
        let idx = build_span_index(
            &tokens,
            &m,
            SpanConfig::new(1, 3).unwrap(),
            RepresentationStrategy::MeanPool,
            StorageMode::Lazy,
        )
        .unwrap();
        assert_eq!(idx.span_count(), 6);
        assert_eq!(idx.stored_vector_count(), 0);
        assert_eq!(idx.doc_id(), "fix");
    }

    #[test]
    fn rejects_misaligned_inputs() {
        let (tokens, _) = fixture(3);
        let (_, m) = fixture(4);
        assert!(build_span_index(
            &tokens,
            &m,
            SpanConfig::default(),
            RepresentationStrategy::MeanPool,
            StorageMode::Lazy,
        )
        .is_err());
    }

    #[test]
    fn ordinal_roundtrip() {
        let (tokens, m) = fixture(7);
        let idx = build_span_index(
            &tokens,
            &m,
            SpanConfig::new(2, 4).unwrap(),
            RepresentationStrategy::MeanPool,
            StorageMode::Lazy,
        )
        .unwrap();
        for (ord, span) in idx.spans().enumerate() {
            assert_eq!(idx.ordinal(span), Some(ord));
        }
        assert_eq!(idx.ordinal(SpanRef::new(0, 1)), None); // too short
        assert_eq!(idx.ordinal(SpanRef::new(0, 5)), None); // too long
        assert_eq!(idx.ordinal(SpanRef::new(6, 8)), None); // out of bounds
    }

    proptest! {
        #[test]
        fn lazy_matches_materialized(n in 1usize..20, endpoint in proptest::bool::ANY) {
            let (tokens, m) = fixture(n);
            let strategy = if endpoint {
                RepresentationStrategy::EndpointConcat
            } else {
                RepresentationStrategy::MeanPool
            };
            let cfg = SpanConfig::new(1, 5).unwrap();
            let lazy = build_span_index(&tokens, &m, cfg, strategy, StorageMode::Lazy).unwrap();
            let mat =
                build_span_index(&tokens, &m, cfg, strategy, StorageMode::Materialized).unwrap();
            prop_assert_eq!(lazy.span_count(), mat.span_count());
            prop_assert_eq!(mat.stored_vector_count(), mat.span_count());
            for span in lazy.spans() {
                let a = lazy.span_vector(span).unwrap();
                let b = mat.span_vector(span).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-6);
                }
            }
        }
    }
}
