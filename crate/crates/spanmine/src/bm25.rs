//! Okapi BM25 baseline.
//!
//! Parameters k1 = 1.5, b = 0.75. IDF uses the probabilistic form
//! `ln((N - df + 0.5) / (df + 0.5))`; values below `eps * mean-IDF`
//! (eps = 0.25, mean over the corpus vocabulary) are lifted to that floor,
//! which keeps very common terms from scoring negatively. Unknown query
//! terms run through the same formula with df = 0; they only contribute
//! when the scored document actually contains them.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::TokenSequence;

pub const BM25_K1: f64 = 1.5;
pub const BM25_B: f64 = 0.75;
pub const IDF_FLOOR_EPSILON: f64 = 0.25;

/// Corpus-level term statistics: document frequencies, document count, and
/// average document length.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    df: BTreeMap<String, u64>,
    n_docs: u64,
    avgdl: f64,
    idf_floor: f64,
}

fn raw_idf(n_docs: u64, df: u64) -> f64 {
    ((n_docs as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
}

impl CorpusStats {
    fn finish(df: BTreeMap<String, u64>, n_docs: u64, avgdl: f64) -> Result<Self> {
        if n_docs == 0 {
            return Err(Error::EmptyInput("corpus has no documents"));
        }
        if avgdl.is_nan() || avgdl <= 0.0 {
            return Err(Error::InvalidConfig(
                "corpus has no tokens (avgdl must be positive)".into(),
            ));
        }
        for (term, &f) in &df {
            if f == 0 || f > n_docs {
                return Err(Error::InvalidConfig(format!(
                    "document frequency {f} for '{term}' outside 1..={n_docs}"
                )));
            }
        }
        // Mean IDF over the vocabulary in deterministic (sorted) order.
        let mean_idf = df.values().map(|&f| raw_idf(n_docs, f)).sum::<f64>() / df.len() as f64;
        Ok(Self {
            df,
            n_docs,
            avgdl,
            idf_floor: IDF_FLOOR_EPSILON * mean_idf,
        })
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn df(&self, term: &str) -> u64 {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn vocabulary_len(&self) -> usize {
        self.df.len()
    }

    /// Floored IDF weight; unknown terms use df = 0 in the same formula.
    pub fn idf(&self, term: &str) -> f64 {
        raw_idf(self.n_docs, self.df(term)).max(self.idf_floor)
    }

    /// Writes the cache: a header line `n_docs\t<N>\tavgdl\t<avgdl>`, then
    /// one `term\tdf` line per vocabulary entry.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "n_docs\t{}\tavgdl\t{}", self.n_docs, self.avgdl)?;
        for (term, df) in &self.df {
            writeln!(w, "{term}\t{df}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::DataFormat {
            path: path.display().to_string(),
            line: 1,
            message: "missing header line".into(),
        })??;
        let fields: Vec<&str> = header.split('\t').collect();
        let bad_header = || Error::DataFormat {
            path: path.display().to_string(),
            line: 1,
            message: format!("bad header '{header}'"),
        };
        if fields.len() != 4 || fields[0] != "n_docs" || fields[2] != "avgdl" {
            return Err(bad_header());
        }
        let n_docs: u64 = fields[1].parse().map_err(|_| bad_header())?;
        let avgdl: f64 = fields[3].parse().map_err(|_| bad_header())?;
        let mut df = BTreeMap::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut it = line.split('\t');
            let (term, count) = match (it.next(), it.next(), it.next()) {
                (Some(t), Some(c), None) => (t, c),
                _ => {
                    return Err(Error::DataFormat {
                        path: path.display().to_string(),
                        line: line_no,
                        message: "expected 'term\\tdf'".into(),
                    })
                }
            };
            let count: u64 = count.parse().map_err(|_| Error::DataFormat {
                path: path.display().to_string(),
                line: line_no,
                message: format!("unparsable df '{count}'"),
            })?;
            df.insert(term.to_string(), count);
        }
        Self::finish(df, n_docs, avgdl)
    }
}

/// Exact document frequencies, count, and average length over the corpus.
pub fn build_corpus_stats(documents: &[TokenSequence]) -> Result<CorpusStats> {
    if documents.is_empty() {
        return Err(Error::EmptyInput("corpus has no documents"));
    }
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    let mut total_len = 0usize;
    for doc in documents {
        total_len += doc.len();
        let mut seen: Vec<&str> = doc.texts().collect();
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *df.entry(term.to_string()).or_insert(0) += 1;
        }
    }
    CorpusStats::finish(df, documents.len() as u64, total_len as f64 / documents.len() as f64)
}

/// Okapi BM25 score of `doc` for `query`. Each query token occurrence
/// contributes separately (a duplicated query term counts twice).
pub fn bm25_score(query: &TokenSequence, doc: &TokenSequence, stats: &CorpusStats) -> f64 {
    if query.is_empty() || doc.is_empty() {
        return 0.0;
    }
    let mut tf: HashMap<&str, f64> = HashMap::new();
    for t in doc.texts() {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    let dl = doc.len() as f64;
    let len_norm = 1.0 - BM25_B + BM25_B * dl / stats.avgdl();
    let mut score = 0.0;
    for term in query.texts() {
        let f = tf.get(term).copied().unwrap_or(0.0);
        if f == 0.0 {
            continue;
        }
        score += stats.idf(term) * (f * (BM25_K1 + 1.0)) / (f + BM25_K1 * len_norm);
    }
    score
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn fixture_corpus() -> Vec<TokenSequence> {
        vec![
            tokenize("fresh coffee beans ground daily coffee"),
            tokenize("tea leaves and coffee culture"),
            tokenize("roasting beans at home"),
        ]
    }

    #[test]
    fn stats_counting() {
        let stats = build_corpus_stats(&fixture_corpus()).unwrap();
        assert_eq!(stats.n_docs(), 3);
        assert!((stats.avgdl() - 5.0).abs() < 1e-15);
        assert_eq!(stats.df("coffee"), 2);
        assert_eq!(stats.df("beans"), 2);
        assert_eq!(stats.df("tea"), 1);
        assert_eq!(stats.df("nope"), 0);
        assert_eq!(stats.vocabulary_len(), 12);
    }

    #[test]
    fn single_doc_stats() {
        let stats = build_corpus_stats(&[tokenize("a b")]).unwrap();
        assert_eq!(stats.n_docs(), 1);
        assert!((stats.avgdl() - 2.0).abs() < 1e-15);
        assert_eq!(stats.df("a"), 1);
        assert_eq!(stats.df("b"), 1);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(build_corpus_stats(&[]).is_err());
        assert!(build_corpus_stats(&[tokenize("")]).is_err());
    }

    /// Values hand-evaluated from the stated formula (recorded alongside the
    /// derivation in the test comment):
    /// raw idf(df=1) = ln(2.5/1.5), idf(df=2) = ln(1.5/2.5) which is negative
    /// and floored to 0.25 * mean-IDF = 0.08513760396099844.
    #[test]
    fn hand_computed_three_doc_fixture() {
        let corpus = fixture_corpus();
        let stats = build_corpus_stats(&corpus).unwrap();
        let q = tokenize("coffee beans");
        assert!((bm25_score(&q, &corpus[0], &stats) - 0.1923865565770977).abs() < 1e-12);
        assert!((bm25_score(&q, &corpus[1], &stats) - 0.08513760396099844).abs() < 1e-12);
        assert!((bm25_score(&q, &corpus[2], &stats) - 0.09355780655054774).abs() < 1e-12);
        // Duplicated query terms count twice.
        let qq = tokenize("tea tea");
        assert!((bm25_score(&qq, &corpus[1], &stats) - 1.0216512475319814).abs() < 1e-12);
    }

    #[test]
    fn idf_flooring() {
        let stats = build_corpus_stats(&fixture_corpus()).unwrap();
        assert!((stats.idf("coffee") - 0.08513760396099844).abs() < 1e-15);
        assert!((stats.idf("tea") - (2.5f64 / 1.5).ln()).abs() < 1e-15);
    }

    #[test]
    fn no_overlap_and_empty_query_score_zero() {
        let corpus = fixture_corpus();
        let stats = build_corpus_stats(&corpus).unwrap();
        assert_eq!(bm25_score(&tokenize("quantum physics"), &corpus[0], &stats), 0.0);
        assert_eq!(bm25_score(&tokenize(""), &corpus[0], &stats), 0.0);
        assert_eq!(bm25_score(&tokenize("espresso"), &corpus[0], &stats), 0.0);
    }

    #[test]
    fn monotone_in_term_frequency() {
        let corpus = fixture_corpus();
        let stats = build_corpus_stats(&corpus).unwrap();
        let q = tokenize("coffee");
        // Fixed length 6, growing number of "coffee" occurrences.
        let mut prev = -1.0;
        for k in 0..=6 {
            let words: Vec<&str> = std::iter::repeat_n("coffee", k)
                .chain(std::iter::repeat_n("filler", 6 - k))
                .collect();
            let doc = tokenize(&words.join(" "));
            let score = bm25_score(&q, &doc, &stats);
            assert!(score >= prev, "score dropped at tf={k}");
            prev = score;
        }
        // Appending an extra occurrence (length grows too) never decreases.
        let shorter = tokenize("coffee filler filler");
        let longer = tokenize("coffee filler filler coffee");
        assert!(bm25_score(&q, &longer, &stats) >= bm25_score(&q, &shorter, &stats));
    }

    #[test]
    fn cache_roundtrip() {
        let stats = build_corpus_stats(&fixture_corpus()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.tsv");
        stats.save(&path).unwrap();
        let loaded = CorpusStats::load(&path).unwrap();
        assert_eq!(stats, loaded);
        let body = std::fs::read_to_string(&path).unwrap();
        assert!(body.starts_with("n_docs\t3\tavgdl\t5\n"));
        assert!(body.contains("coffee\t2\n"));
    }

    #[test]
    fn cache_rejects_corrupt_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "n_docs\t3\tavgdl\t5\ncoffee\tnot-a-number\n").unwrap();
        assert!(CorpusStats::load(&path).is_err());
        std::fs::write(&path, "wrong header\n").unwrap();
        assert!(CorpusStats::load(&path).is_err());
        std::fs::write(&path, "n_docs\t3\tavgdl\t5\nterm\t9\n").unwrap();
        assert!(CorpusStats::load(&path).is_err()); // df > n_docs
    }
}
