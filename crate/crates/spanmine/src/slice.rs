//! Span-max late-interaction contrastive objective (SLICE).
//!
//! Given a triplet (query, positive passage, negative passage), the objective
//! pools the query into one vector, finds each passage's best-matching span
//! under normalized cosine, and penalizes the negative's best match relative
//! to the positive's:
//!
//! ```text
//! L = -λ·sim_true + log(exp(λ·sim_true) + exp(λ·sim_false))
//!   = softplus(λ·(sim_false - sim_true))
//! ```
//!
//! Everything here runs at 64-bit precision; with λ = 30 the exponentials
//! underflow at f32 near the saturation regions. Gradients use the
//! subgradient of max: all mass lands on the argmax span, first span on
//! exact ties.

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::search::scan_best_mean;
use crate::span::{build_prefix, mean_pool, PrefixMatrix, SpanConfig, SpanRef};

/// Loss hyperparameters: sharpening constant and the span bounds applied to
/// both passages.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub lambda: f64,
    pub span: SpanConfig,
}

impl LossConfig {
    pub fn new(lambda: f64, span: SpanConfig) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be a positive real, got {lambda}"
            )));
        }
        Ok(Self { lambda, span })
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 30.0,
            span: SpanConfig::training(),
        }
    }
}

/// Forward-pass outputs: the loss, both similarities, and the winning spans.
#[derive(Debug, Clone, Copy)]
pub struct LossOutput {
    pub loss: f64,
    pub sim_true: f64,
    pub sim_false: f64,
    pub argmax_true: SpanRef,
    pub argmax_false: SpanRef,
}

/// `log(1 + exp(z))` without overflow on either tail.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Partial derivatives of the loss with respect to the two similarities:
/// `(-λσ, +λσ)` with `σ = sigmoid(λ·(sim_false - sim_true))`.
pub fn sim_gradients(sim_true: f64, sim_false: f64, lambda: f64) -> (f64, f64) {
    let sigma = sigmoid(lambda * (sim_false - sim_true));
    (-lambda * sigma, lambda * sigma)
}

struct PassageMatch {
    prefix: PrefixMatrix,
    span: SpanRef,
    sim: f64,
}

fn match_passage(
    query: &[f64],
    passage: &EmbeddingMatrix,
    cfg: &LossConfig,
) -> Result<PassageMatch> {
    if passage.dim() != query.len() {
        return Err(Error::DimensionMismatch {
            expected: query.len(),
            actual: passage.dim(),
        });
    }
    let prefix = build_prefix(passage);
    let best = scan_best_mean(query, &prefix, cfg.span, None)?.ok_or(Error::NoAdmissibleSpans {
        len: passage.len(),
        min: cfg.span.min_size(),
        max: cfg.span.max_size(),
    })?;
    Ok(PassageMatch {
        prefix,
        span: best.span,
        sim: best.score,
    })
}

fn forward_parts(
    query: &EmbeddingMatrix,
    positive: &EmbeddingMatrix,
    negative: &EmbeddingMatrix,
    cfg: &LossConfig,
) -> Result<(Vec<f64>, PassageMatch, PassageMatch, LossOutput)> {
    if query.is_empty() {
        return Err(Error::EmptyInput("query has no tokens"));
    }
    let pooled_query = query.mean_row()?;
    let pos = match_passage(&pooled_query, positive, cfg)?;
    let neg = match_passage(&pooled_query, negative, cfg)?;
    let loss = softplus(cfg.lambda * (neg.sim - pos.sim));
    let output = LossOutput {
        loss,
        sim_true: pos.sim,
        sim_false: neg.sim,
        argmax_true: pos.span,
        argmax_false: neg.span,
    };
    Ok((pooled_query, pos, neg, output))
}

/// Evaluates the objective on one triplet of embedding matrices. The query is
/// mean-pooled whole (never span-decomposed); each passage contributes the
/// maximum similarity over its admissible spans.
pub fn slice_forward(
    query: &EmbeddingMatrix,
    positive: &EmbeddingMatrix,
    negative: &EmbeddingMatrix,
    cfg: &LossConfig,
) -> Result<LossOutput> {
    let (_, _, _, output) = forward_parts(query, positive, negative, cfg)?;
    Ok(output)
}

/// Analytic gradients of the loss with respect to every row of all three
/// matrices, as `n x d` row vectors.
#[derive(Debug, Clone)]
pub struct SliceGradients {
    pub output: LossOutput,
    pub query: Vec<Vec<f64>>,
    pub positive: Vec<Vec<f64>>,
    pub negative: Vec<Vec<f64>>,
}

const DEGENERATE_NORM: f64 = 1e-12;

/// Gradients of `s = (1 + cos(u, v)) / 2` with respect to `u` and `v`.
/// Degenerate inputs (norm < 1e-12) score a constant 0.0, so their
/// subgradient is zero.
fn cosine_grads(u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu < DEGENERATE_NORM || nv < DEGENERATE_NORM {
        return (vec![0.0; u.len()], vec![0.0; v.len()]);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let cos = dot / (nu * nv);
    let du = u
        .iter()
        .zip(v)
        .map(|(&ui, &vi)| 0.5 * (vi / (nu * nv) - cos * ui / (nu * nu)))
        .collect();
    let dv = u
        .iter()
        .zip(v)
        .map(|(&ui, &vi)| 0.5 * (ui / (nu * nv) - cos * vi / (nv * nv)))
        .collect();
    (du, dv)
}

pub fn slice_gradient(
    query: &EmbeddingMatrix,
    positive: &EmbeddingMatrix,
    negative: &EmbeddingMatrix,
    cfg: &LossConfig,
) -> Result<SliceGradients> {
    let (pooled_query, pos, neg, output) = forward_parts(query, positive, negative, cfg)?;
    let dim = query.dim();
    let (d_st, d_sf) = sim_gradients(output.sim_true, output.sim_false, cfg.lambda);

    let pos_mean = mean_pool(pos.span, &pos.prefix)?;
    let neg_mean = mean_pool(neg.span, &neg.prefix)?;
    let (dst_dq, dst_dm) = cosine_grads(&pooled_query, &pos_mean);
    let (dsf_dq, dsf_dm) = cosine_grads(&pooled_query, &neg_mean);

    // Query rows share the pooled-query gradient equally (mean pooling).
    let n_q = query.len() as f64;
    let pooled_grad: Vec<f64> = (0..dim)
        .map(|j| (d_st * dst_dq[j] + d_sf * dsf_dq[j]) / n_q)
        .collect();
    let query_grads = vec![pooled_grad; query.len()];

    // Passage gradients: all mass on the argmax span, spread by its length.
    let spread = |m: &EmbeddingMatrix, span: SpanRef, d_sim: f64, dsim_dm: &[f64]| {
        let mut rows = vec![vec![0.0f64; dim]; m.len()];
        let inv_len = 1.0 / span.len() as f64;
        for row in rows.iter_mut().take(span.end).skip(span.start) {
            for (g, &dm) in row.iter_mut().zip(dsim_dm) {
                *g = d_sim * dm * inv_len;
            }
        }
        rows
    };
    let positive_grads = spread(positive, pos.span, d_st, &dst_dm);
    let negative_grads = spread(negative, neg.span, d_sf, &dsf_dm);

    Ok(SliceGradients {
        output,
        query: query_grads,
        positive: positive_grads,
        negative: negative_grads,
    })
}
