//! spanmine: phrase mining over noisy contexts with span-aggregatable
//! contextualized token embeddings.
//!
//! Given a query phrase and documents whose interesting spans sit inside
//! distracting context, this crate finds the consecutive token span that best
//! matches the query. Documents are encoded once into per-token vectors;
//! every span between configurable length bounds is represented by mean
//! pooling (prefix-sum accelerated) or endpoint concatenation, scored with
//! normalized cosine, and the per-document maximum drives retrieval.
//!
//! The same span machinery powers a contrastive training objective over
//! (query, positive, negative) triples, a trainer for the built-in toy
//! encoder, an evaluation harness comparing three context-representation
//! setups, and an Okapi BM25 baseline with Pearson/Spearman/Williams'-test
//! statistics.
//!
//! ```
//! use spanmine::embed::toy::{ToyEncoder, ToyEncoderParams};
//! use spanmine::{best_span_match, build_span_index, Encoder};
//! use spanmine::{RepresentationStrategy, SpanConfig, StorageMode};
//!
//! # fn main() -> spanmine::Result<()> {
//! let encoder = ToyEncoder::new(ToyEncoderParams::seeded(42));
//! let (tokens, matrix) = encoder.encode(
//!     "catching a glimpse of the ocean, a group of boys are playing \
//!      soccer on the beach",
//! )?;
//! let index = build_span_index(
//!     &tokens,
//!     &matrix,
//!     SpanConfig::default(),
//!     RepresentationStrategy::MeanPool,
//!     StorageMode::Lazy,
//! )?;
//!
//! let (_, query) = encoder.encode("men play soccer on the beach")?;
//! let hit = best_span_match(&query.mean_row()?, &index)?.unwrap();
//! assert!(hit.score > 0.5);
//! assert!(hit.char_end <= tokens[tokens.len() - 1].char_end);
//! # Ok(())
//! # }
//! ```

pub mod bm25;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod exchange;
pub mod parallel;
pub mod search;
pub mod slice;
pub mod span;
pub mod stats;
pub mod text;
pub mod train;

pub use embed::{build_encoder, EmbeddingMatrix, Encoder, ToyEncoder, ToyEncoderParams};
pub use error::{Error, Result};
pub use search::{best_span_match, normalized_cosine, top_k_search, ScoredSpan};
pub use slice::{slice_forward, slice_gradient, LossConfig, LossOutput};
pub use span::{
    build_span_index, enumerate_spans, RepresentationStrategy, SpanConfig, SpanIndex, SpanRef,
    StorageMode,
};
pub use text::{tokenize, Token, TokenSequence};
pub use train::{train_toy, TrainConfig, TrainReport};
