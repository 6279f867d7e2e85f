//! Normalized cosine similarity and span matching.
//!
//! Similarity is `(1 + cos(u, v)) / 2`, an order-preserving map of cosine
//! onto `[0, 1]`. Matching a query against a document takes the maximum over
//! all indexed spans; ties go to the first span in enumeration order.

use crate::error::{Error, Result};
use crate::parallel;
use crate::span::{PrefixMatrix, SpanConfig, SpanIndex, SpanRef};

/// A span paired with its similarity score and resolved character offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSpan {
    pub doc_id: String,
    pub span: SpanRef,
    pub score: f64,
    pub char_start: usize,
    pub char_end: usize,
}

const DEGENERATE_NORM: f64 = 1e-12;

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity mapped to `[0, 1]` via `(1 + cos) / 2`, at 64-bit
/// precision. A vector with norm below `1e-12` is degenerate: the score is
/// 0.0 and a warning is logged (out-of-vocabulary rows must not abort scans).
pub fn normalized_cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu < DEGENERATE_NORM || nv < DEGENERATE_NORM {
        log::warn!("normalized_cosine: degenerate input (norms {nu:.3e}, {nv:.3e}); scoring 0.0");
        return Ok(0.0);
    }
    let cos = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(0.5 * (1.0 + cos))
}

pub(crate) struct BestSpan {
    pub span: SpanRef,
    pub score: f64,
}

/// Scan kernel shared by [`best_span_match`] and the training objective:
/// maximum normalized cosine over mean-pooled spans of a prefix matrix,
/// first span winning ties.
pub(crate) fn scan_best_mean(
    query: &[f64],
    prefix: &PrefixMatrix,
    cfg: SpanConfig,
    norms: Option<&[f64]>,
) -> Result<Option<BestSpan>> {
    if query.len() != prefix.dim() {
        return Err(Error::DimensionMismatch {
            expected: prefix.dim(),
            actual: query.len(),
        });
    }
    let n = prefix.rows() - 1;
    let qn = norm(query);
    let mut best: Option<BestSpan> = None;
    let mut scratch = vec![0.0f64; prefix.dim()];
    let mut degenerate = 0usize;
    for (ord, span) in crate::span::span_iter(n, cfg).enumerate() {
        prefix.mean_into(span, &mut scratch)?;
        let sn = match norms {
            Some(ns) => ns[ord],
            None => norm(&scratch),
        };
        let score = if qn < DEGENERATE_NORM || sn < DEGENERATE_NORM {
            degenerate += 1;
            0.0
        } else {
            0.5 * (1.0 + (dot(query, &scratch) / (qn * sn)).clamp(-1.0, 1.0))
        };
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(BestSpan { span, score });
        }
    }
    if degenerate > 0 {
        log::warn!("span scan: {degenerate} degenerate span scores set to 0.0");
    }
    Ok(best)
}

fn scan_index(query: &[f64], index: &SpanIndex) -> Result<Option<BestSpan>> {
    if query.len() != index.rep_dim() {
        return Err(Error::DimensionMismatch {
            expected: index.rep_dim(),
            actual: query.len(),
        });
    }
    let qn = norm(query);
    let mut best: Option<BestSpan> = None;
    let mut degenerate = 0usize;
    index.for_each_span(|ord, span, vector| {
        let sn = index.span_norm(ord);
        let score = if qn < DEGENERATE_NORM || sn < DEGENERATE_NORM {
            degenerate += 1;
            0.0
        } else {
            0.5 * (1.0 + (dot(query, vector) / (qn * sn)).clamp(-1.0, 1.0))
        };
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(BestSpan { span, score });
        }
    })?;
    if degenerate > 0 {
        log::warn!("span scan: {degenerate} degenerate span scores set to 0.0");
    }
    Ok(best)
}

/// The indexed span most similar to `query`, or `None` when the index holds
/// no spans.
pub fn best_span_match(query: &[f64], index: &SpanIndex) -> Result<Option<ScoredSpan>> {
    let Some(best) = scan_index(query, index)? else {
        return Ok(None);
    };
    let (char_start, char_end) = index.tokens().char_span(best.span.start, best.span.end)?;
    Ok(Some(ScoredSpan {
        doc_id: index.doc_id().to_string(),
        span: best.span,
        score: best.score,
        char_start,
        char_end,
    }))
}

/// Best span per document, then the top `k` documents by score. Ties on
/// score order by `doc_id` so rankings are reproducible.
pub fn top_k_search(query: &[f64], corpus: &[SpanIndex], k: usize) -> Result<Vec<ScoredSpan>> {
    if k == 0 {
        return Err(Error::InvalidConfig("top-k requires k >= 1".into()));
    }
    let per_doc: Vec<Result<Option<ScoredSpan>>> = parallel::install(|| {
        use rayon::prelude::*;
        corpus
            .par_iter()
            .map(|index| best_span_match(query, index))
            .collect()
    });
    let mut hits = Vec::with_capacity(corpus.len());
    for r in per_doc {
        if let Some(hit) = r? {
            hits.push(hit);
        }
    }
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    hits.truncate(k);
    Ok(hits)
}

/// Resolves a scored span's text out of the original document.
pub fn matched_text(original: &str, hit: &ScoredSpan) -> String {
    crate::text::char_slice(original, hit.char_start, hit.char_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingMatrix;
    use crate::span::{build_span_index, RepresentationStrategy, StorageMode};
    use crate::text::tokenize;
    use proptest::prelude::*;

    #[test]
    fn cosine_extremes() {
        assert_eq!(normalized_cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(normalized_cosine(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(normalized_cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn cosine_rejects_dim_mismatch() {
        assert!(normalized_cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_norm_scores_zero() {
        assert_eq!(normalized_cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    }

    fn index_of(
        rows: &[Vec<f32>],
        cfg: SpanConfig,
        strategy: RepresentationStrategy,
    ) -> SpanIndex {
        let words: Vec<String> = (0..rows.len()).map(|i| format!("w{i}")).collect();
        let tokens = tokenize(&words.join(" "));
        let m = EmbeddingMatrix::from_rows("doc", rows).unwrap();
        build_span_index(&tokens, &m, cfg, strategy, StorageMode::Lazy).unwrap()
    }

    #[test]
    fn finds_planted_identical_span() {
        let rows = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, -1.0],
            vec![-1.0, 0.0],
        ];
        let idx = index_of(
            &rows,
            SpanConfig::new(1, 1).unwrap(),
            RepresentationStrategy::MeanPool,
        );
        let hit = best_span_match(&[1.0, 0.0], &idx).unwrap().unwrap();
        assert_eq!(hit.span, SpanRef::new(1, 2));
        assert!((hit.score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_index_returns_none() {
        let idx = index_of(
            &[vec![1.0, 0.0]],
            SpanConfig::new(2, 3).unwrap(),
            RepresentationStrategy::MeanPool,
        );
        assert_eq!(idx.span_count(), 0);
        assert!(best_span_match(&[1.0, 0.0], &idx).unwrap().is_none());
    }

    #[test]
    fn tie_break_is_first_span() {
        // Two identical rows: both single-token spans score 1.0; the earlier
        // one must win.
        let rows = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let idx = index_of(
            &rows,
            SpanConfig::new(1, 1).unwrap(),
            RepresentationStrategy::MeanPool,
        );
        let hit = best_span_match(&[2.0, 0.0], &idx).unwrap().unwrap();
        assert_eq!(hit.span, SpanRef::new(0, 1));
    }

    /// Exhaustive oracle: enumerate, pool directly, cosine.
    fn brute_force(query: &[f64], idx: &SpanIndex) -> Option<(SpanRef, f64)> {
        let mut best: Option<(SpanRef, f64)> = None;
        for span in idx.spans() {
            let v = idx.span_vector(span).unwrap();
            let score = normalized_cosine(query, &v).unwrap();
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((span, score));
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_brute_force_oracle(
            rows in proptest::collection::vec(
                proptest::collection::vec(-5.0f32..5.0, 4..=4), 1..24),
            query in proptest::collection::vec(-5.0f64..5.0, 4..=4),
            b in 1usize..6,
        ) {
            let idx = index_of(&rows, SpanConfig::new(1, b).unwrap(),
                               RepresentationStrategy::MeanPool);
            let got = best_span_match(&query, &idx).unwrap();
            let want = brute_force(&query, &idx);
            match (got, want) {
                (Some(g), Some((span, score))) => {
                    prop_assert_eq!(g.span, span);
                    prop_assert!((g.score - score).abs() < 1e-12);
                }
                (None, None) => {}
                other => prop_assert!(false, "disagreement: {:?}", other.0),
            }
        }

        #[test]
        fn scores_stay_in_unit_interval(
            u in proptest::collection::vec(-100.0f64..100.0, 3..=3),
            v in proptest::collection::vec(-100.0f64..100.0, 3..=3),
        ) {
            let s = normalized_cosine(&u, &v).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn scale_invariance(
            u in proptest::collection::vec(-10.0f64..10.0, 4..=4),
            v in proptest::collection::vec(-10.0f64..10.0, 4..=4),
            alpha in 0.001f64..100.0,
            beta in 0.001f64..100.0,
        ) {
            let su: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            let sv: Vec<f64> = v.iter().map(|x| x * beta).collect();
            let a = normalized_cosine(&u, &v).unwrap();
            let b = normalized_cosine(&su, &sv).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn symmetry(
            u in proptest::collection::vec(-10.0f64..10.0, 5..=5),
            v in proptest::collection::vec(-10.0f64..10.0, 5..=5),
        ) {
            prop_assert_eq!(
                normalized_cosine(&u, &v).unwrap(),
                normalized_cosine(&v, &u).unwrap()
            );
        }

        #[test]
        fn widening_bounds_never_lowers_best(
            rows in proptest::collection::vec(
                proptest::collection::vec(-5.0f32..5.0, 3..=3), 2..16),
            query in proptest::collection::vec(-5.0f64..5.0, 3..=3),
            b in 1usize..4,
        ) {
            let narrow = index_of(&rows, SpanConfig::new(1, b).unwrap(),
                                  RepresentationStrategy::MeanPool);
            let wide = index_of(&rows, SpanConfig::new(1, b + 2).unwrap(),
                                RepresentationStrategy::MeanPool);
            let s1 = best_span_match(&query, &narrow).unwrap().unwrap().score;
            let s2 = best_span_match(&query, &wide).unwrap().unwrap().score;
            prop_assert!(s2 >= s1 - 1e-15);
        }
    }

    #[test]
    fn top_k_ranks_and_truncates() {
        let mk = |rows: &[Vec<f32>], id: &str| {
            let words: Vec<String> = (0..rows.len()).map(|i| format!("w{i}")).collect();
            let tokens = tokenize(&words.join(" "));
            let m = EmbeddingMatrix::from_rows(id, rows).unwrap();
            build_span_index(
                &tokens,
                &m,
                SpanConfig::new(1, 2).unwrap(),
                RepresentationStrategy::MeanPool,
                StorageMode::Lazy,
            )
            .unwrap()
        };
        let corpus = vec![
            mk(&[vec![0.0, 1.0]], "a"),
            mk(&[vec![1.0, 0.0]], "b"),
            mk(&[vec![1.0, 1.0]], "c"),
        ];
        let hits = top_k_search(&[1.0, 0.0], &corpus, 2).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].doc_id, "b");
        assert_eq!(hits[1].doc_id, "c");

        // k beyond corpus size ranks everything.
        let all = top_k_search(&[1.0, 0.0], &corpus, 10).unwrap();
        assert_eq!(all.len(), 3);

        // Empty corpus.
        assert!(top_k_search(&[1.0, 0.0], &[], 3).unwrap().is_empty());
    }

    #[test]
    fn top_k_tie_breaks_by_doc_id() {
        let mk = |id: &str| {
            let tokens = tokenize("one");
            let m = EmbeddingMatrix::from_rows(id, &[vec![1.0f32, 0.0]]).unwrap();
            build_span_index(
                &tokens,
                &m,
                SpanConfig::new(1, 1).unwrap(),
                RepresentationStrategy::MeanPool,
                StorageMode::Lazy,
            )
            .unwrap()
        };
        let corpus = vec![mk("zeta"), mk("alpha"), mk("mid")];
        let hits = top_k_search(&[1.0, 0.0], &corpus, 3).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["alpha", "mid", "zeta"]);
    }
}
