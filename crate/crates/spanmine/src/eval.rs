//! Evaluation setups and reporting.
//!
//! Three ways to predict the similarity between an origin phrase and a
//! phrase-in-context, sharing one encoder:
//!
//! - `full_context`: one mean-pooled vector for the whole context against the
//!   mean-pooled phrase (both sides mean-pooled regardless of strategy).
//! - `per_ngram`: every admissible n-gram is re-encoded in isolation (its
//!   text reconstructed from character offsets) and pooled; the maximum
//!   similarity wins. This is the N*K-forward-passes setup.
//! - `single_pass`: the context is encoded once; span vectors are aggregated
//!   from that single encoding through a lazy span index.
//!
//! Reports pair per-setup correlations with Williams' tests between every
//! setup pair, computed on the shared gold vector.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::data::EvalRecord;
use crate::embed::{Encoder, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::parallel;
use crate::search::{best_span_match, normalized_cosine};
use crate::span::{
    build_span_index, endpoint_concat, enumerate_spans, RepresentationStrategy, SpanConfig,
    SpanRef, StorageMode,
};
use crate::stats::{correlation_report, pearson, williams_test, CorrelationReport};
use crate::text::{char_slice, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalSetup {
    FullContext,
    PerNgram,
    SinglePass,
}

impl EvalSetup {
    pub const ALL: [EvalSetup; 3] = [Self::FullContext, Self::PerNgram, Self::SinglePass];

    pub fn id(&self) -> &'static str {
        match self {
            Self::FullContext => "full_context",
            Self::PerNgram => "per_ngram",
            Self::SinglePass => "single_pass",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full_context" | "full" => Ok(Self::FullContext),
            "per_ngram" | "per-ngram" => Ok(Self::PerNgram),
            "single_pass" | "single-pass" => Ok(Self::SinglePass),
            other => Err(Error::InvalidConfig(format!(
                "unknown setup '{other}' (expected full | per-ngram | single-pass)"
            ))),
        }
    }
}

/// One record's prediction with the matched span's character offsets
/// (the whole context for `full_context`).
#[derive(Debug, Clone, PartialEq)]
pub struct RecordPrediction {
    pub id: String,
    pub gold: f64,
    pub prediction: f64,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupResult {
    pub setup: EvalSetup,
    pub correlations: CorrelationReport,
    pub predictions: Vec<RecordPrediction>,
}

fn record_failure(id: &str, source: Error) -> Error {
    Error::RecordFailed {
        record_id: id.to_string(),
        source: Box::new(source),
    }
}

/// Query representation under a strategy: mean of all rows, or first-row /
/// last-row concatenation (the query is treated as one whole span).
fn query_vector(
    emb: &EmbeddingMatrix,
    strategy: RepresentationStrategy,
) -> Result<Vec<f64>> {
    match strategy {
        RepresentationStrategy::MeanPool => emb.mean_row(),
        RepresentationStrategy::EndpointConcat => {
            if emb.is_empty() {
                return Err(Error::EmptyInput("query has no tokens"));
            }
            endpoint_concat(SpanRef::new(0, emb.len()), emb)
        }
    }
}

fn whole_range(tokens: &TokenSequence) -> (usize, usize) {
    if tokens.is_empty() {
        (0, 0)
    } else {
        (tokens[0].char_start, tokens[tokens.len() - 1].char_end)
    }
}

fn predict_record(
    record: &EvalRecord,
    encoder: &dyn Encoder,
    setup: EvalSetup,
    cfg: SpanConfig,
    strategy: RepresentationStrategy,
) -> Result<RecordPrediction> {
    let fail = |e: Error| record_failure(&record.id, e);

    let (_q_tokens, q_emb) = encoder.encode(&record.origin_phrase).map_err(fail)?;
    if q_emb.is_empty() {
        return Err(fail(Error::EmptyInput("origin phrase has no tokens")));
    }

    let (prediction, char_start, char_end) = match setup {
        EvalSetup::FullContext => {
            let (c_tokens, c_emb) = encoder.encode(&record.context).map_err(fail)?;
            if c_emb.is_empty() {
                return Err(fail(Error::EmptyInput("context has no tokens")));
            }
            let score = normalized_cosine(
                &c_emb.mean_row().map_err(fail)?,
                &q_emb.mean_row().map_err(fail)?,
            )
            .map_err(fail)?;
            let (lo, hi) = whole_range(&c_tokens);
            (score, lo, hi)
        }
        EvalSetup::PerNgram => {
            let query = query_vector(&q_emb, strategy).map_err(fail)?;
            let (c_tokens, _) = encoder.encode(&record.context).map_err(fail)?;
            let spans = enumerate_spans(c_tokens.len(), cfg);
            if spans.is_empty() {
                return Err(fail(Error::NoAdmissibleSpans {
                    len: c_tokens.len(),
                    min: cfg.min_size(),
                    max: cfg.max_size(),
                }));
            }
            let texts: Vec<String> = spans
                .iter()
                .map(|s| {
                    let (lo, hi) = c_tokens.char_span(s.start, s.end)?;
                    Ok(char_slice(&record.context, lo, hi))
                })
                .collect::<Result<_>>()
                .map_err(fail)?;
            let text_refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let encoded = encoder.encode_batch(&text_refs).map_err(fail)?;
            let mut best: Option<(f64, SpanRef)> = None;
            for (span, (_, ngram_emb)) in spans.iter().zip(&encoded) {
                let v = query_vector(ngram_emb, strategy).map_err(fail)?;
                let score = normalized_cosine(&query, &v).map_err(fail)?;
                if best.is_none_or(|(b, _)| score > b) {
                    best = Some((score, *span));
                }
            }
            let (score, span) = best.expect("nonempty span set");
            let (lo, hi) = c_tokens.char_span(span.start, span.end).map_err(fail)?;
            (score, lo, hi)
        }
        EvalSetup::SinglePass => {
            let query = query_vector(&q_emb, strategy).map_err(fail)?;
            let (c_tokens, c_emb) = encoder.encode(&record.context).map_err(fail)?;
            let index = build_span_index(&c_tokens, &c_emb, cfg, strategy, StorageMode::Lazy)
                .map_err(fail)?;
            let hit = best_span_match(&query, &index)
                .map_err(fail)?
                .ok_or_else(|| {
                    fail(Error::NoAdmissibleSpans {
                        len: c_tokens.len(),
                        min: cfg.min_size(),
                        max: cfg.max_size(),
                    })
                })?;
            (hit.score, hit.char_start, hit.char_end)
        }
    };

    Ok(RecordPrediction {
        id: record.id.clone(),
        gold: record.gold_score,
        prediction,
        char_start,
        char_end,
    })
}

/// Evaluates one setup over all records and correlates predictions with gold
/// scores. Records evaluate in parallel; aggregation preserves input order.
pub fn eval_setup(
    records: &[EvalRecord],
    encoder: &dyn Encoder,
    setup: EvalSetup,
    cfg: SpanConfig,
    strategy: RepresentationStrategy,
) -> Result<SetupResult> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no evaluation records"));
    }
    let predictions: Vec<RecordPrediction> = parallel::install(|| {
        use rayon::prelude::*;
        records
            .par_iter()
            .map(|r| predict_record(r, encoder, setup, cfg, strategy))
            .collect::<Result<Vec<_>>>()
    })?;
    let golds: Vec<f64> = predictions.iter().map(|p| p.gold).collect();
    let preds: Vec<f64> = predictions.iter().map(|p| p.prediction).collect();
    let correlations = correlation_report(&preds, &golds)?;
    Ok(SetupResult {
        setup,
        correlations,
        predictions,
    })
}

/// Configuration echoed into every report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub min_span: usize,
    pub max_span: usize,
    pub encoder_id: String,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupSummary {
    pub setup: EvalSetup,
    pub pearson: f64,
    pub spearman: f64,
    pub n: usize,
}

/// Williams' test between two setups' predictions against the shared gold.
#[derive(Debug, Clone, PartialEq)]
pub struct WilliamsComparison {
    pub setup_a: EvalSetup,
    pub setup_b: EvalSetup,
    /// pearson(gold, predictions_a)
    pub r_gold_a: f64,
    /// pearson(gold, predictions_b)
    pub r_gold_b: f64,
    /// pearson(predictions_a, predictions_b)
    pub r_ab: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: ReportConfig,
    pub setups: Vec<SetupSummary>,
    pub comparisons: Vec<WilliamsComparison>,
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

fn check_same_records(results: &[SetupResult]) -> Result<()> {
    let first = &results[0].predictions;
    for r in &results[1..] {
        if r.predictions.len() != first.len() {
            return Err(Error::ReportMismatch(format!(
                "setup {} evaluated {} records, {} evaluated {}",
                results[0].setup.id(),
                first.len(),
                r.setup.id(),
                r.predictions.len()
            )));
        }
        for (a, b) in first.iter().zip(&r.predictions) {
            if a.id != b.id || a.gold != b.gold {
                return Err(Error::ReportMismatch(format!(
                    "record sets differ at id '{}' / '{}'",
                    a.id, b.id
                )));
            }
        }
    }
    Ok(())
}

/// Builds the report: per-setup correlations plus one Williams' entry per
/// setup pair, flagged at p < 0.05. All setups must cover identical records.
pub fn build_report(results: &[SetupResult], config: ReportConfig) -> Result<EvalReport> {
    if results.is_empty() {
        return Err(Error::EmptyInput("no setup results"));
    }
    check_same_records(results)?;

    let setups = results
        .iter()
        .map(|r| SetupSummary {
            setup: r.setup,
            pearson: r.correlations.pearson,
            spearman: r.correlations.spearman,
            n: r.correlations.n,
        })
        .collect();

    let gold: Vec<f64> = results[0].predictions.iter().map(|p| p.gold).collect();
    let mut comparisons = Vec::new();
    for i in 0..results.len() {
        for j in (i + 1)..results.len() {
            let a: Vec<f64> = results[i].predictions.iter().map(|p| p.prediction).collect();
            let b: Vec<f64> = results[j].predictions.iter().map(|p| p.prediction).collect();
            let r_gold_a = results[i].correlations.pearson;
            let r_gold_b = results[j].correlations.pearson;
            let (r_ab, t, p) = if a == b {
                // Identical prediction vectors: no difference to test.
                (1.0, 0.0, 1.0)
            } else {
                let r_ab = pearson(&a, &b)?;
                let w = williams_test(r_gold_a, r_gold_b, r_ab, gold.len())?;
                (r_ab, w.t, w.p)
            };
            comparisons.push(WilliamsComparison {
                setup_a: results[i].setup,
                setup_b: results[j].setup,
                r_gold_a,
                r_gold_b,
                r_ab,
                t,
                p,
                significant: p < SIGNIFICANCE_LEVEL,
            });
        }
    }

    Ok(EvalReport {
        config,
        setups,
        comparisons,
    })
}

/// Renders the tab-separated summary. Floats print in shortest
/// round-trippable form so a reload reproduces them bit-for-bit.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "config\tmin_span\t{}", report.config.min_span);
    let _ = writeln!(out, "config\tmax_span\t{}", report.config.max_span);
    let _ = writeln!(out, "config\tencoder\t{}", report.config.encoder_id);
    let _ = writeln!(out, "config\tstrategy\t{}", report.config.strategy);
    for s in &report.setups {
        let _ = writeln!(
            out,
            "setup\t{}\tpearson\t{}\tspearman\t{}\tn\t{}",
            s.setup.id(),
            s.pearson,
            s.spearman,
            s.n
        );
    }
    for c in &report.comparisons {
        let _ = writeln!(
            out,
            "williams\t{}\t{}\tr12\t{}\tr13\t{}\tr23\t{}\tt\t{}\tp\t{}\tsignificant\t{}",
            c.setup_a.id(),
            c.setup_b.id(),
            c.r_gold_a,
            c.r_gold_b,
            c.r_ab,
            c.t,
            c.p,
            c.significant
        );
    }
    out
}

/// Writes the summary and the per-record predictions file
/// (`setup, id, gold, prediction, char_start, char_end`).
pub fn write_report(
    report: &EvalReport,
    results: &[SetupResult],
    summary_path: impl AsRef<Path>,
    predictions_path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(summary_path, render_report(report))?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(predictions_path)?);
    writeln!(w, "#setup\tid\tgold\tprediction\tchar_start\tchar_end")?;
    for r in results {
        for p in &r.predictions {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.setup.id(),
                p.id,
                p.gold,
                p.prediction,
                p.char_start,
                p.char_end
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::DataFormat {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Parses a summary file back into an [`EvalReport`].
pub fn read_report(summary_path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = summary_path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut config = ReportConfig {
        min_span: 0,
        max_span: 0,
        encoder_id: String::new(),
        strategy: String::new(),
    };
    let mut setups = Vec::new();
    let mut comparisons = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        match f[0] {
            "config" if f.len() == 3 => match f[1] {
                "min_span" => {
                    config.min_span =
                        f[2].parse().map_err(|_| parse_err(path, line_no, "bad min_span"))?
                }
                "max_span" => {
                    config.max_span =
                        f[2].parse().map_err(|_| parse_err(path, line_no, "bad max_span"))?
                }
                "encoder" => config.encoder_id = f[2].to_string(),
                "strategy" => config.strategy = f[2].to_string(),
                other => return Err(parse_err(path, line_no, format!("unknown config key {other}"))),
            },
            "setup" if f.len() == 8 => {
                let parse_f64 = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| parse_err(path, line_no, format!("bad float '{s}'")))
                };
                setups.push(SetupSummary {
                    setup: EvalSetup::parse(f[1])?,
                    pearson: parse_f64(f[3])?,
                    spearman: parse_f64(f[5])?,
                    n: f[7].parse().map_err(|_| parse_err(path, line_no, "bad n"))?,
                });
            }
            "williams" if f.len() == 15 => {
                let parse_f64 = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| parse_err(path, line_no, format!("bad float '{s}'")))
                };
                comparisons.push(WilliamsComparison {
                    setup_a: EvalSetup::parse(f[1])?,
                    setup_b: EvalSetup::parse(f[2])?,
                    r_gold_a: parse_f64(f[4])?,
                    r_gold_b: parse_f64(f[6])?,
                    r_ab: parse_f64(f[8])?,
                    t: parse_f64(f[10])?,
                    p: parse_f64(f[12])?,
                    significant: f[14] == "true",
                });
            }
            _ => return Err(parse_err(path, line_no, format!("unrecognized line '{line}'"))),
        }
    }
    Ok(EvalReport {
        config,
        setups,
        comparisons,
    })
}

/// Parses the per-record predictions file.
pub fn read_predictions(
    path: impl AsRef<Path>,
) -> Result<Vec<(EvalSetup, RecordPrediction)>> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(parse_err(path, line_no, "expected 6 columns"));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| parse_err(path, line_no, format!("bad float '{s}'")))
        };
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(path, line_no, format!("bad integer '{s}'")))
        };
        out.push((
            EvalSetup::parse(f[0])?,
            RecordPrediction {
                id: f[1].to_string(),
                gold: num(f[2])?,
                prediction: num(f[3])?,
                char_start: int(f[4])?,
                char_end: int(f[5])?,
            },
        ));
    }
    Ok(out)
}
