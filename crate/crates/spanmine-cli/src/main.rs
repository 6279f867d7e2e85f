//! spanmine command-line interface.
//!
//! Subcommands: `index` a corpus into a span-index file, `search` it for a
//! phrase, `eval` the three context-representation setups against gold
//! scores, `train-toy` the built-in encoder on triples, `synth` seeded
//! fixtures, score a `bm25` baseline, and serve the external-encoder
//! protocol with `extern-stub`.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use spanmine::data::{load_msmarco_triples, load_stsb_context, synth_generate, ColumnMap, SynthParams};
use spanmine::embed::toy::{ToyEncoder, ToyEncoderParams};
use spanmine::embed::{build_encoder, external, Encoder};
use spanmine::eval::{
    build_report, eval_setup, render_report, write_report, EvalSetup, ReportConfig, SetupResult,
};
use spanmine::exchange::{read_index_file, write_index_file, StoredDoc};
use spanmine::search::{matched_text, top_k_search};
use spanmine::slice::LossConfig;
use spanmine::span::{endpoint_concat, RepresentationStrategy, SpanConfig, SpanRef, StorageMode};
use spanmine::text::tokenize;
use spanmine::train::{train_toy, TrainConfig};
use spanmine::{bm25, EmbeddingMatrix};

#[derive(Parser)]
#[command(name = "spanmine", version, about = "Phrase mining over noisy contexts")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Minimum span length in tokens.
    #[arg(long, global = true, default_value_t = 1)]
    min_span: usize,

    /// Maximum span length in tokens.
    #[arg(long, global = true, default_value_t = 20)]
    max_span: usize,

    /// Encoder selector: toy | static:<path> | extern:<cmd>.
    #[arg(long, global = true, default_value = "toy")]
    encoder: String,

    /// Span representation: mean | endpoint.
    #[arg(long, global = true, default_value = "mean")]
    strategy: String,

    /// Seed for the toy encoder and the generators.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn span_config(&self) -> Result<SpanConfig> {
        Ok(SpanConfig::new(self.min_span, self.max_span)?)
    }

    fn strategy(&self) -> Result<RepresentationStrategy> {
        Ok(RepresentationStrategy::parse(&self.strategy)?)
    }

    fn encoder(&self) -> Result<Box<dyn Encoder>> {
        Ok(build_encoder(&self.encoder, self.seed)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Encode documents and persist a span-index file.
    Index {
        /// Directory of .txt documents, or a TSV file of `id<TAB>text` lines.
        #[arg(long)]
        input: PathBuf,
        /// Output index file.
        #[arg(long)]
        output: PathBuf,
        /// Storage mode: lazy | materialized.
        #[arg(long, default_value = "lazy")]
        mode: String,
    },
    /// Find the best-matching spans for a query phrase.
    Search {
        #[arg(long)]
        query: String,
        /// Index file produced by `index`.
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Correlate setup predictions with gold scores and emit a report.
    Eval {
        /// TSV of gold-scored records.
        #[arg(long)]
        records: PathBuf,
        /// full | per-ngram | single-pass | all.
        #[arg(long, default_value = "all")]
        setup: String,
        /// Summary output path.
        #[arg(long)]
        report: PathBuf,
        /// Per-record predictions output path.
        #[arg(long)]
        predictions: PathBuf,
        /// Skip malformed rows instead of failing.
        #[arg(long)]
        lenient: bool,
        #[arg(long, default_value_t = 0)]
        score_col: usize,
        #[arg(long, default_value_t = 1)]
        origin_col: usize,
        #[arg(long, default_value_t = 2)]
        context_col: usize,
        /// Optional column carrying record ids.
        #[arg(long)]
        id_col: Option<usize>,
    },
    /// Train the toy encoder's mixing matrices on triples.
    TrainToy {
        /// TSV of `query<TAB>positive<TAB>negative` lines.
        #[arg(long)]
        triples: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        /// Output params file.
        #[arg(long)]
        out: PathBuf,
        /// Toy encoder dimension (fresh initialization).
        #[arg(long, default_value_t = 64)]
        dim: usize,
        /// Toy encoder context window.
        #[arg(long, default_value_t = 2)]
        window: usize,
        /// Resume from an existing params file instead of initializing.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Span bound for passages during training.
        #[arg(long, default_value_t = 10)]
        train_max_span: usize,
        #[arg(long, default_value_t = 30.0)]
        lambda: f64,
    },
    /// Generate seeded planted-phrase records and triples.
    Synth {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 50)]
        vocab: usize,
        /// Inclusive phrase length bounds, LO..HI.
        #[arg(long, default_value = "3..6")]
        phrase_len: String,
        /// Inclusive context length bounds, LO..HI.
        #[arg(long, default_value = "10..20")]
        context_len: String,
        #[arg(long, default_value_t = 0.25)]
        noise: f64,
        #[arg(long)]
        out_records: PathBuf,
        #[arg(long)]
        out_triples: PathBuf,
    },
    /// Score a document against a query with Okapi BM25.
    Bm25 {
        /// Directory of .txt documents for corpus statistics.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Load statistics from a cache file instead of a corpus.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Write the computed statistics to a cache file.
        #[arg(long)]
        save_stats: Option<PathBuf>,
        #[arg(long)]
        query: String,
        /// Text file holding the document to score.
        #[arg(long)]
        doc: PathBuf,
    },
    /// Serve the external-encoder protocol on stdio with the toy encoder.
    ExternStub {
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        window: usize,
    },
}

fn read_corpus(input: &Path) -> Result<Vec<(String, String)>> {
    let mut docs = Vec::new();
    if input.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        paths.sort();
        for path in paths {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("doc")
                .to_string();
            docs.push((id, std::fs::read_to_string(&path)?));
        }
    } else {
        for (i, line) in std::fs::read_to_string(input)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, text) = line
                .split_once('\t')
                .with_context(|| format!("{}:{}: expected 'id\\ttext'", input.display(), i + 1))?;
            docs.push((id.to_string(), text.to_string()));
        }
    }
    if docs.is_empty() {
        bail!("no documents found in {}", input.display());
    }
    Ok(docs)
}

/// Query-side representation matching the index strategy.
fn query_vector(
    emb: &EmbeddingMatrix,
    strategy: RepresentationStrategy,
) -> Result<Vec<f64>> {
    if emb.is_empty() {
        bail!("query has no tokens after tokenization");
    }
    Ok(match strategy {
        RepresentationStrategy::MeanPool => emb.mean_row()?,
        RepresentationStrategy::EndpointConcat => {
            endpoint_concat(SpanRef::new(0, emb.len()), emb)?
        }
    })
}

fn parse_bounds(raw: &str) -> Result<(usize, usize)> {
    let (lo, hi) = raw
        .split_once("..")
        .with_context(|| format!("expected LO..HI bounds, got '{raw}'"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn cmd_index(common: &Common, input: &Path, output: &Path, mode: &str) -> Result<()> {
    let cfg = common.span_config()?;
    let strategy = common.strategy()?;
    let mode = StorageMode::parse(mode)?;
    let encoder = common.encoder()?;
    let docs = read_corpus(input)?;
    let mut stored = Vec::with_capacity(docs.len());
    for (id, text) in &docs {
        let (tokens, matrix) = encoder
            .encode(text)
            .with_context(|| format!("encoding document '{id}'"))?;
        stored.push(StoredDoc {
            text: text.clone(),
            tokens,
            matrix: matrix.with_doc_id(id.clone()),
        });
    }
    write_index_file(output, &stored, cfg, strategy, mode)?;
    let spans: usize = stored
        .iter()
        .map(|d| spanmine::span::span_count(d.tokens.len(), cfg))
        .sum();
    eprintln!(
        "indexed {} document(s), {} span(s) -> {}",
        stored.len(),
        spans,
        output.display()
    );
    Ok(())
}

fn cmd_search(common: &Common, query: &str, index_path: &Path, top_k: usize) -> Result<()> {
    let persisted = read_index_file(index_path)?;
    let encoder = common.encoder()?;
    let (_, q_emb) = encoder.encode(query)?;
    let q = query_vector(&q_emb, persisted.strategy)?;
    let indexes = persisted.build()?;
    let hits = top_k_search(&q, &indexes, top_k.max(1))?;
    let text_by_id: std::collections::HashMap<&str, &str> = persisted
        .docs
        .iter()
        .map(|d| (d.matrix.doc_id(), d.text.as_str()))
        .collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for hit in &hits {
        let snippet = text_by_id
            .get(hit.doc_id.as_str())
            .map(|t| matched_text(t, hit))
            .unwrap_or_default();
        writeln!(
            out,
            "{}\t{:.6}\t{}\t{}\t{}",
            hit.doc_id, hit.score, hit.char_start, hit.char_end, snippet
        )?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    common: &Common,
    records_path: &Path,
    setup: &str,
    report_path: &Path,
    predictions_path: &Path,
    lenient: bool,
    map: ColumnMap,
) -> Result<()> {
    let cfg = common.span_config()?;
    let strategy = common.strategy()?;
    let encoder = common.encoder()?;
    let loaded = load_stsb_context(records_path, &map, lenient)?;
    if !loaded.skipped.is_empty() {
        eprintln!("skipped {} malformed row(s)", loaded.skipped.len());
    }
    let setups: Vec<EvalSetup> = if setup == "all" {
        EvalSetup::ALL.to_vec()
    } else {
        vec![EvalSetup::parse(setup)?]
    };
    let results: Vec<SetupResult> = setups
        .iter()
        .map(|s| eval_setup(&loaded.records, encoder.as_ref(), *s, cfg, strategy))
        .collect::<spanmine::Result<_>>()?;
    let report = build_report(
        &results,
        ReportConfig {
            min_span: cfg.min_size(),
            max_span: cfg.max_size(),
            encoder_id: encoder.id(),
            strategy: strategy.name().to_string(),
        },
    )?;
    write_report(&report, &results, report_path, predictions_path)?;
    print!("{}", render_report(&report));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train_toy(
    common: &Common,
    triples_path: &Path,
    steps: usize,
    lr: f64,
    out: &Path,
    dim: usize,
    window: usize,
    init: Option<&Path>,
    train_max_span: usize,
    lambda: f64,
) -> Result<()> {
    let triples = load_msmarco_triples(triples_path)?;
    let params = match init {
        Some(path) => ToyEncoderParams::load(path)?,
        None => ToyEncoderParams::with_dims(dim, window, common.seed),
    };
    let cfg = TrainConfig {
        learning_rate: lr,
        steps,
        seed: common.seed,
        loss: LossConfig::new(lambda, SpanConfig::new(common.min_span, train_max_span)?)?,
    };
    let report = train_toy(&triples, &params, &cfg)?;
    report.params.save(out)?;
    for point in &report.curve {
        println!(
            "step\t{}\tmean_loss\t{:.6}\tmean_separation\t{:.6}",
            point.step, point.mean_loss, point.mean_separation
        );
    }
    eprintln!("params -> {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    common: &Common,
    count: usize,
    vocab: usize,
    phrase_len: &str,
    context_len: &str,
    noise: f64,
    out_records: &Path,
    out_triples: &Path,
) -> Result<()> {
    let params = SynthParams {
        vocab_size: vocab,
        phrase_len: parse_bounds(phrase_len)?,
        context_len: parse_bounds(context_len)?,
        noise,
        count,
        seed: common.seed,
    };
    let (records, triples) = synth_generate(&params)?;
    let mut rec_out = String::new();
    for r in &records {
        rec_out.push_str(&format!("{}\t{}\t{}\n", r.gold_score, r.origin_phrase, r.context));
    }
    std::fs::write(out_records, rec_out)?;
    let mut tri_out = String::new();
    for t in &triples {
        tri_out.push_str(&format!("{}\t{}\t{}\n", t.query, t.positive, t.negative));
    }
    std::fs::write(out_triples, tri_out)?;
    eprintln!(
        "wrote {} record(s) -> {} and {} triple(s) -> {}",
        records.len(),
        out_records.display(),
        triples.len(),
        out_triples.display()
    );
    Ok(())
}

fn cmd_bm25(
    corpus: Option<&Path>,
    stats_path: Option<&Path>,
    save_stats: Option<&Path>,
    query: &str,
    doc: &Path,
) -> Result<()> {
    let stats = match (stats_path, corpus) {
        (Some(path), _) => bm25::CorpusStats::load(path)?,
        (None, Some(dir)) => {
            let docs = read_corpus(dir)?;
            let tokenized: Vec<_> = docs.iter().map(|(_, text)| tokenize(text)).collect();
            bm25::build_corpus_stats(&tokenized)?
        }
        (None, None) => bail!("bm25 needs --corpus <dir> or --stats <cache>"),
    };
    if let Some(path) = save_stats {
        stats.save(path)?;
        eprintln!("stats -> {}", path.display());
    }
    let doc_text = std::fs::read_to_string(doc)?;
    let score = bm25::bm25_score(&tokenize(query), &tokenize(&doc_text), &stats);
    println!("{score}");
    Ok(())
}

fn cmd_extern_stub(common: &Common, dim: usize, window: usize) -> Result<()> {
    let encoder = ToyEncoder::new(ToyEncoderParams::with_dims(dim, window, common.seed));
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let served = external::respond_with_encoder(stdin.lock(), stdout.lock(), &encoder)?;
    eprintln!("served {served} request(s)");
    Ok(())
}

fn main() -> Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    let common = &cli.common;
    match &cli.command {
        Command::Index {
            input,
            output,
            mode,
        } => cmd_index(common, input, output, mode),
        Command::Search {
            query,
            index,
            top_k,
        } => cmd_search(common, query, index, *top_k),
        Command::Eval {
            records,
            setup,
            report,
            predictions,
            lenient,
            score_col,
            origin_col,
            context_col,
            id_col,
        } => cmd_eval(
            common,
            records,
            setup,
            report,
            predictions,
            *lenient,
            ColumnMap {
                id: *id_col,
                score: *score_col,
                origin_phrase: *origin_col,
                context: *context_col,
            },
        ),
        Command::TrainToy {
            triples,
            steps,
            lr,
            out,
            dim,
            window,
            init,
            train_max_span,
            lambda,
        } => cmd_train_toy(
            common,
            triples,
            *steps,
            *lr,
            out,
            *dim,
            *window,
            init.as_deref(),
            *train_max_span,
            *lambda,
        ),
        Command::Synth {
            count,
            vocab,
            phrase_len,
            context_len,
            noise,
            out_records,
            out_triples,
        } => cmd_synth(
            common,
            *count,
            *vocab,
            phrase_len,
            context_len,
            *noise,
            out_records,
            out_triples,
        ),
        Command::Bm25 {
            corpus,
            stats,
            save_stats,
            query,
            doc,
        } => cmd_bm25(
            corpus.as_deref(),
            stats.as_deref(),
            save_stats.as_deref(),
            query,
            doc,
        ),
        Command::ExternStub { dim, window } => cmd_extern_stub(common, *dim, *window),
    }
}
