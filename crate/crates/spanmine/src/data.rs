//! Dataset loading and synthetic planted-phrase generation.
//!
//! Two tab-separated inputs are understood: STS-B-Context-style evaluation
//! rows (gold similarity, origin phrase, phrase-in-context) and triples
//! training rows (query, positive passage, negative passage). The synthetic
//! generator plants a noisy paraphrase of a sampled phrase inside random
//! context and maps the applied noise fraction to a gold score, giving
//! seeded end-to-end fixtures without any external data.

use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A (query, positive, negative) training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub query: String,
    pub positive: String,
    pub negative: String,
}

/// A gold-scored evaluation row: the origin phrase and a context holding a
/// paraphrase of it somewhere inside.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub id: String,
    pub gold_score: f64,
    pub origin_phrase: String,
    pub context: String,
}

/// Which tab-separated column holds what. Defaults to
/// `score, origin_phrase, context` with ids assigned from line numbers.
#[derive(Debug, Clone, Copy)]
pub struct ColumnMap {
    pub id: Option<usize>,
    pub score: usize,
    pub origin_phrase: usize,
    pub context: usize,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: None,
            score: 0,
            origin_phrase: 1,
            context: 2,
        }
    }
}

/// A row rejected by the lenient loader, with its 1-based line number.
#[derive(Debug, Clone)]
pub struct SkippedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct LoadOutcome {
    pub records: Vec<EvalRecord>,
    pub skipped: Vec<SkippedRow>,
}

fn parse_record(fields: &[&str], map: &ColumnMap, line: usize) -> std::result::Result<EvalRecord, String> {
    let need = map
        .score
        .max(map.origin_phrase)
        .max(map.context)
        .max(map.id.unwrap_or(0));
    if fields.len() <= need {
        return Err(format!(
            "expected at least {} tab-separated columns, found {}",
            need + 1,
            fields.len()
        ));
    }
    let raw_score = fields[map.score];
    let gold_score: f64 = raw_score
        .trim()
        .parse()
        .map_err(|_| format!("unparsable score '{raw_score}'"))?;
    if !(0.0..=5.0).contains(&gold_score) {
        return Err(format!("score {gold_score} outside [0, 5]"));
    }
    let origin_phrase = fields[map.origin_phrase].trim();
    let context = fields[map.context].trim();
    if origin_phrase.is_empty() {
        return Err("empty origin phrase".into());
    }
    if context.is_empty() {
        return Err("empty context".into());
    }
    let id = match map.id {
        Some(col) => fields[col].trim().to_string(),
        None => line.to_string(),
    };
    Ok(EvalRecord {
        id,
        gold_score,
        origin_phrase: origin_phrase.to_string(),
        context: context.to_string(),
    })
}

/// Loads STS-B-Context-style evaluation rows. Under `lenient`, malformed rows
/// are skipped and reported with line numbers; otherwise the first bad row is
/// fatal.
pub fn load_stsb_context(
    path: impl AsRef<Path>,
    map: &ColumnMap,
    lenient: bool,
) -> Result<LoadOutcome> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = LoadOutcome::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match parse_record(&fields, map, line_no) {
            Ok(rec) => out.records.push(rec),
            Err(reason) if lenient => {
                log::warn!("{}:{line_no}: skipping row: {reason}", path.display());
                out.skipped.push(SkippedRow {
                    line: line_no,
                    reason,
                });
            }
            Err(reason) => {
                return Err(Error::DataFormat {
                    path: path.display().to_string(),
                    line: line_no,
                    message: reason,
                })
            }
        }
    }
    Ok(out)
}

/// Loads `query \t positive \t negative` triples, in file order. Any line
/// without exactly three non-empty fields is an error carrying its line
/// number.
pub fn load_msmarco_triples(path: impl AsRef<Path>) -> Result<Vec<Triple>> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::DataFormat {
                path: path.display().to_string(),
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.trim().is_empty()) {
            return Err(Error::DataFormat {
                path: path.display().to_string(),
                line: line_no,
                message: "empty field in triple".into(),
            });
        }
        triples.push(Triple {
            query: fields[0].trim().to_string(),
            positive: fields[1].trim().to_string(),
            negative: fields[2].trim().to_string(),
        });
    }
    Ok(triples)
}

/// Controls for the synthetic generator.
#[derive(Debug, Clone, Copy)]
pub struct SynthParams {
    pub vocab_size: usize,
    /// Inclusive bounds on sampled phrase length.
    pub phrase_len: (usize, usize),
    /// Inclusive bounds on the number of context tokens around the phrase.
    pub context_len: (usize, usize),
    /// Per-token substitution probability.
    pub noise: f64,
    pub count: usize,
    pub seed: u64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::InvalidConfig("vocab_size must be >= 2".into()));
        }
        if self.phrase_len.0 == 0 || self.phrase_len.0 > self.phrase_len.1 {
            return Err(Error::InvalidConfig(format!(
                "phrase_len bounds invalid: {:?}",
                self.phrase_len
            )));
        }
        if self.context_len.0 == 0 || self.context_len.0 > self.context_len.1 {
            return Err(Error::InvalidConfig(format!(
                "context_len bounds invalid: {:?}",
                self.context_len
            )));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidConfig(format!(
                "noise rate {} outside [0, 1]",
                self.noise
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidConfig("count must be positive".into()));
        }
        Ok(())
    }
}

fn word(i: usize) -> String {
    format!("w{i}")
}

fn sample_tokens(rng: &mut ChaCha8Rng, vocab: usize, len: usize) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(0..vocab)).collect()
}

fn join(tokens: &[usize]) -> String {
    tokens
        .iter()
        .map(|&i| word(i))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Deterministic planted-phrase generation. For each example: sample a
/// phrase, substitute each token with probability `noise` (always with a
/// different word), plant the paraphrase at a random offset inside random
/// context tokens, and map the applied substitution fraction `f` to
/// `gold = 5 * (1 - f)`. Also emits a training triple per example:
/// (phrase, planted context, fresh random context).
pub fn synth_generate(params: &SynthParams) -> Result<(Vec<EvalRecord>, Vec<Triple>)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut records = Vec::with_capacity(params.count);
    let mut triples = Vec::with_capacity(params.count);

    for i in 0..params.count {
        let phrase_len = rng.gen_range(params.phrase_len.0..=params.phrase_len.1);
        let phrase = sample_tokens(&mut rng, params.vocab_size, phrase_len);

        let mut paraphrase = phrase.clone();
        let mut substituted = 0usize;
        for tok in paraphrase.iter_mut() {
            if rng.gen_bool(params.noise) {
                let mut alt = rng.gen_range(0..params.vocab_size - 1);
                if alt >= *tok {
                    alt += 1; // skip the original word
                }
                *tok = alt;
                substituted += 1;
            }
        }
        let gold = 5.0 * (1.0 - substituted as f64 / phrase_len as f64);

        let ctx_len = rng.gen_range(params.context_len.0..=params.context_len.1);
        let surround = sample_tokens(&mut rng, params.vocab_size, ctx_len);
        let at = rng.gen_range(0..=ctx_len);
        let mut context = Vec::with_capacity(ctx_len + phrase_len);
        context.extend_from_slice(&surround[..at]);
        context.extend_from_slice(&paraphrase);
        context.extend_from_slice(&surround[at..]);

        let negative = sample_tokens(&mut rng, params.vocab_size, ctx_len + phrase_len);

        let origin_phrase = join(&phrase);
        let context_text = join(&context);
        records.push(EvalRecord {
            id: format!("synth-{i}"),
            gold_score: gold,
            origin_phrase: origin_phrase.clone(),
            context: context_text.clone(),
        });
        triples.push(Triple {
            query: origin_phrase,
            positive: context_text,
            negative: join(&negative),
        });
    }
    Ok((records, triples))
}
