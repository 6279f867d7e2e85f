//! Desk-scale trainer for the toy contextualizer.
//!
//! Plain gradient descent on the mixing matrices `A` and `B`, batch size 1,
//! re-selecting argmax spans every step. Deterministic under the seed: the
//! only randomness is the per-epoch shuffle of triple order.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Triple;
use crate::embed::toy::{
    base_vectors, context_means, contextualize_prepared, rows_to_f64, ToyEncoderParams,
};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::slice::{slice_forward, slice_gradient, LossConfig};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            steps: 200,
            seed: 0,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Full-dataset statistics recorded along the loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_loss: f64,
    /// Mean of (sim_true - sim_false).
    pub mean_separation: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: ToyEncoderParams,
    /// Entry at step 0, after every full pass over the triples, and after the
    /// final step.
    pub curve: Vec<CurvePoint>,
}

/// A text reduced to what each step needs: f64 base rows and their window
/// means. Base vectors do not depend on `A`/`B`, so these stay valid across
/// updates.
struct PreparedText {
    n: usize,
    base: Vec<f64>,
    means: Vec<f64>,
}

fn prepare(text: &str, params: &ToyEncoderParams, role: &str, index: usize) -> Result<PreparedText> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::RecordFailed {
            record_id: format!("triple {index} ({role})"),
            source: Box::new(Error::EmptyInput("text has no tokens after tokenization")),
        });
    }
    let base_m = base_vectors(&tokens, params);
    let base = rows_to_f64(&base_m);
    let means = context_means(&base, tokens.len(), params.dim, params.window);
    Ok(PreparedText {
        n: tokens.len(),
        base,
        means,
    })
}

fn embed(p: &PreparedText, params: &ToyEncoderParams) -> Result<EmbeddingMatrix> {
    contextualize_prepared(&p.base, &p.means, p.n, params)
}

struct PreparedTriple {
    query: PreparedText,
    positive: PreparedText,
    negative: PreparedText,
}

fn prepare_all(triples: &[Triple], params: &ToyEncoderParams) -> Result<Vec<PreparedTriple>> {
    triples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(PreparedTriple {
                query: prepare(&t.query, params, "query", i)?,
                positive: prepare(&t.positive, params, "positive", i)?,
                negative: prepare(&t.negative, params, "negative", i)?,
            })
        })
        .collect()
}

/// Accumulates `dA += g_i (x) base_i` and `dB += g_i (x) means_i` for one
/// text's row gradients. Rows with all-zero gradient (outside the argmax
/// span) are skipped.
fn accumulate(
    p: &PreparedText,
    grads: &[Vec<f64>],
    dim: usize,
    da: &mut [f64],
    db: &mut [f64],
) {
    for (i, g) in grads.iter().enumerate() {
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        let base = &p.base[i * dim..(i + 1) * dim];
        let means = &p.means[i * dim..(i + 1) * dim];
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            let row_a = &mut da[r * dim..(r + 1) * dim];
            for (a, &x) in row_a.iter_mut().zip(base) {
                *a += gr * x;
            }
            let row_b = &mut db[r * dim..(r + 1) * dim];
            for (b, &x) in row_b.iter_mut().zip(means) {
                *b += gr * x;
            }
        }
    }
}

fn dataset_stats(
    prepared: &[PreparedTriple],
    params: &ToyEncoderParams,
    loss: &LossConfig,
    step: usize,
) -> Result<CurvePoint> {
    let mut sum_loss = 0.0;
    let mut sum_sep = 0.0;
    for t in prepared {
        let out = slice_forward(
            &embed(&t.query, params)?,
            &embed(&t.positive, params)?,
            &embed(&t.negative, params)?,
            loss,
        )?;
        sum_loss += out.loss;
        sum_sep += out.sim_true - out.sim_false;
    }
    let n = prepared.len() as f64;
    Ok(CurvePoint {
        step,
        mean_loss: sum_loss / n,
        mean_separation: sum_sep / n,
    })
}

/// Mean loss and mean (sim_true - sim_false) of `params` over `triples`.
pub fn evaluate_triples(
    triples: &[Triple],
    params: &ToyEncoderParams,
    loss: &LossConfig,
) -> Result<CurvePoint> {
    if triples.is_empty() {
        return Err(Error::EmptyInput("no triples to evaluate"));
    }
    params.validate()?;
    let prepared = prepare_all(triples, params)?;
    dataset_stats(&prepared, params, loss, 0)
}

fn diverged(step: usize, detail: impl Into<String>) -> Error {
    Error::Diverged {
        step,
        detail: detail.into(),
    }
}

/// Trains `A` and `B` on the triples and returns the updated parameters with
/// the loss/separation curve.
pub fn train_toy(
    triples: &[Triple],
    params: &ToyEncoderParams,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if triples.is_empty() {
        return Err(Error::EmptyInput("no training triples"));
    }
    cfg.validate()?;
    params.validate()?;

    let mut params = params.clone();
    let dim = params.dim;
    let prepared = prepare_all(triples, &params)?;
    let mut curve = vec![dataset_stats(&prepared, &params, &cfg.loss, 0)?];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut pos = 0usize;
    let mut da = vec![0.0f64; dim * dim];
    let mut db = vec![0.0f64; dim * dim];

    for step in 1..=cfg.steps {
        if pos == 0 {
            order.shuffle(&mut rng);
        }
        let t = &prepared[order[pos]];
        pos = (pos + 1) % prepared.len();

        let step_err = |e: Error| match e {
            Error::NonFinite { .. } => diverged(step, "non-finite embedding values"),
            other => other,
        };
        let grads = slice_gradient(
            &embed(&t.query, &params).map_err(step_err)?,
            &embed(&t.positive, &params).map_err(step_err)?,
            &embed(&t.negative, &params).map_err(step_err)?,
            &cfg.loss,
        )?;
        if !grads.output.loss.is_finite() {
            return Err(diverged(step, format!("loss = {}", grads.output.loss)));
        }

        da.iter_mut().for_each(|v| *v = 0.0);
        db.iter_mut().for_each(|v| *v = 0.0);
        accumulate(&t.query, &grads.query, dim, &mut da, &mut db);
        accumulate(&t.positive, &grads.positive, dim, &mut da, &mut db);
        accumulate(&t.negative, &grads.negative, dim, &mut da, &mut db);

        for (p, g) in params.a.iter_mut().zip(&da) {
            *p -= cfg.learning_rate * g;
        }
        for (p, g) in params.b.iter_mut().zip(&db) {
            *p -= cfg.learning_rate * g;
        }
        if params.a.iter().chain(params.b.iter()).any(|v| !v.is_finite()) {
            return Err(diverged(step, "non-finite parameters after update"));
        }

        if pos == 0 || step == cfg.steps {
            curve.push(dataset_stats(&prepared, &params, &cfg.loss, step)?);
        }
    }

    Ok(TrainReport { params, curve })
}
