//! Binary file formats.
//!
//! Embedding exchange file (`SAEM`):
//!
//! ```text
//! magic "SAEM" (4 bytes) | format version u32 LE | doc count u64 LE
//! per doc:
//!   doc_id      u32 LE length + UTF-8 bytes
//!   token count u32 LE
//!   dim         u32 LE
//!   token table: per token u32 LE length + UTF-8 text,
//!                char_start u32 LE, char_end u32 LE
//!   rows        token_count * dim f32 LE, row-major
//! ```
//!
//! Span index file (`SAIX`): the same header shape plus span metadata
//! (min/max span size, strategy, storage mode), and each document carries its
//! original text after the embedding payload so search results can surface
//! matched substrings.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::span::{
    build_span_index, RepresentationStrategy, SpanConfig, SpanIndex, StorageMode,
};
use crate::text::{Token, TokenSequence};

pub const EXCHANGE_MAGIC: &[u8; 4] = b"SAEM";
pub const INDEX_MAGIC: &[u8; 4] = b"SAIX";
pub const FORMAT_VERSION: u32 = 1;

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    w.write_u32::<LittleEndian>(bytes.len() as u32)?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::FileFormat(format!("invalid UTF-8: {e}")))
}

fn write_doc<W: Write>(w: &mut W, tokens: &TokenSequence, matrix: &EmbeddingMatrix) -> Result<()> {
    if tokens.len() != matrix.len() {
        return Err(Error::DimensionMismatch {
            expected: tokens.len(),
            actual: matrix.len(),
        });
    }
    write_string(w, matrix.doc_id())?;
    w.write_u32::<LittleEndian>(tokens.len() as u32)?;
    w.write_u32::<LittleEndian>(matrix.dim() as u32)?;
    for tok in tokens.iter() {
        write_string(w, &tok.text)?;
        w.write_u32::<LittleEndian>(tok.char_start as u32)?;
        w.write_u32::<LittleEndian>(tok.char_end as u32)?;
    }
    for &v in matrix.data() {
        w.write_f32::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_doc<R: Read>(r: &mut R) -> Result<(TokenSequence, EmbeddingMatrix)> {
    let doc_id = read_string(r)?;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        let text = read_string(r)?;
        let char_start = r.read_u32::<LittleEndian>()? as usize;
        let char_end = r.read_u32::<LittleEndian>()? as usize;
        tokens.push(Token {
            text,
            char_start,
            char_end,
        });
    }
    let tokens = TokenSequence::new(tokens)?;
    let mut data = vec![0.0f32; n * dim];
    for v in &mut data {
        *v = r.read_f32::<LittleEndian>()?;
    }
    let matrix = EmbeddingMatrix::new(doc_id, dim, data)?;
    Ok((tokens, matrix))
}

fn check_magic<R: Read>(r: &mut R, want: &[u8; 4]) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != want {
        return Err(Error::FileFormat(format!(
            "bad magic {magic:?}, expected {want:?}"
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::FileFormat(format!(
            "unsupported format version {version} (supported: {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

/// Writes the embedding exchange stream.
pub fn write_embeddings<W: Write>(
    mut w: W,
    docs: &[(TokenSequence, EmbeddingMatrix)],
) -> Result<()> {
    w.write_all(EXCHANGE_MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u64::<LittleEndian>(docs.len() as u64)?;
    for (tokens, matrix) in docs {
        write_doc(&mut w, tokens, matrix)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embeddings<R: Read>(mut r: R) -> Result<Vec<(TokenSequence, EmbeddingMatrix)>> {
    check_magic(&mut r, EXCHANGE_MAGIC)?;
    let count = r.read_u64::<LittleEndian>()? as usize;
    (0..count).map(|_| read_doc(&mut r)).collect()
}

pub fn write_embeddings_file(
    path: impl AsRef<Path>,
    docs: &[(TokenSequence, EmbeddingMatrix)],
) -> Result<()> {
    write_embeddings(BufWriter::new(std::fs::File::create(path)?), docs)
}

pub fn read_embeddings_file(path: impl AsRef<Path>) -> Result<Vec<(TokenSequence, EmbeddingMatrix)>> {
    read_embeddings(BufReader::new(std::fs::File::open(path)?))
}

/// One persisted document: original text plus aligned tokens/embeddings.
#[derive(Debug, Clone)]
pub struct StoredDoc {
    pub text: String,
    pub tokens: TokenSequence,
    pub matrix: EmbeddingMatrix,
}

/// The contents of a span index file.
#[derive(Debug, Clone)]
pub struct PersistedIndex {
    pub config: SpanConfig,
    pub strategy: RepresentationStrategy,
    pub mode: StorageMode,
    pub docs: Vec<StoredDoc>,
}

impl PersistedIndex {
    /// Rebuilds the in-memory span indexes.
    pub fn build(&self) -> Result<Vec<SpanIndex>> {
        self.docs
            .iter()
            .map(|d| build_span_index(&d.tokens, &d.matrix, self.config, self.strategy, self.mode))
            .collect()
    }
}

fn strategy_tag(s: RepresentationStrategy) -> u8 {
    match s {
        RepresentationStrategy::MeanPool => 0,
        RepresentationStrategy::EndpointConcat => 1,
    }
}

fn mode_tag(m: StorageMode) -> u8 {
    match m {
        StorageMode::Materialized => 0,
        StorageMode::Lazy => 1,
    }
}

pub fn write_index_file(
    path: impl AsRef<Path>,
    docs: &[StoredDoc],
    config: SpanConfig,
    strategy: RepresentationStrategy,
    mode: StorageMode,
) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(INDEX_MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(config.min_size() as u32)?;
    w.write_u32::<LittleEndian>(config.max_size() as u32)?;
    w.write_u8(strategy_tag(strategy))?;
    w.write_u8(mode_tag(mode))?;
    w.write_u64::<LittleEndian>(docs.len() as u64)?;
    for doc in docs {
        write_doc(&mut w, &doc.tokens, &doc.matrix)?;
        write_string(&mut w, &doc.text)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_index_file(path: impl AsRef<Path>) -> Result<PersistedIndex> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    check_magic(&mut r, INDEX_MAGIC)?;
    let min = r.read_u32::<LittleEndian>()? as usize;
    let max = r.read_u32::<LittleEndian>()? as usize;
    let config = SpanConfig::new(min, max)?;
    let strategy = match r.read_u8()? {
        0 => RepresentationStrategy::MeanPool,
        1 => RepresentationStrategy::EndpointConcat,
        t => return Err(Error::FileFormat(format!("unknown strategy tag {t}"))),
    };
    let mode = match r.read_u8()? {
        0 => StorageMode::Materialized,
        1 => StorageMode::Lazy,
        t => return Err(Error::FileFormat(format!("unknown storage mode tag {t}"))),
    };
    let count = r.read_u64::<LittleEndian>()? as usize;
    let mut docs = Vec::with_capacity(count);
    for _ in 0..count {
        let (tokens, matrix) = read_doc(&mut r)?;
        let text = read_string(&mut r)?;
        docs.push(StoredDoc {
            text,
            tokens,
            matrix,
        });
    }
    Ok(PersistedIndex {
        config,
        strategy,
        mode,
        docs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::toy::{ToyEncoder, ToyEncoderParams};
    use crate::embed::Encoder;

    fn sample_docs() -> Vec<(TokenSequence, EmbeddingMatrix)> {
        let enc = ToyEncoder::new(ToyEncoderParams::with_dims(8, 2, 13));
        ["a group of men", "blue and red plane in mid-air flight."]
            .iter()
            .enumerate()
            .map(|(i, text)| {
                let (tokens, matrix) = enc.encode(text).unwrap();
                (tokens, matrix.with_doc_id(format!("doc-{i}")))
            })
            .collect()
    }

    #[test]
    fn exchange_roundtrip_bitexact() {
        let docs = sample_docs();
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &docs).unwrap();
        assert_eq!(&buf[..4], EXCHANGE_MAGIC);
        let loaded = read_embeddings(buf.as_slice()).unwrap();
        assert_eq!(loaded.len(), docs.len());
        for ((t0, m0), (t1, m1)) in docs.iter().zip(&loaded) {
            assert_eq!(t0, t1);
            assert_eq!(m0.doc_id(), m1.doc_id());
            assert_eq!(m0.data(), m1.data());
        }
    }

    /// Pins the wire layout byte for byte: magic, LE header fields,
    /// length-prefixed strings, u32 offsets, f32 rows.
    #[test]
    fn exchange_golden_bytes() {
        let tokens = TokenSequence::new(vec![crate::text::Token {
            text: "a".into(),
            char_start: 0,
            char_end: 1,
        }])
        .unwrap();
        let matrix = EmbeddingMatrix::new("d", 2, vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &[(tokens, matrix)]).unwrap();
        let expected: Vec<u8> = vec![
            b'S', b'A', b'E', b'M', // magic
            1, 0, 0, 0, // version u32 LE
            1, 0, 0, 0, 0, 0, 0, 0, // doc count u64 LE
            1, 0, 0, 0, b'd', // doc_id
            1, 0, 0, 0, // token count
            2, 0, 0, 0, // dim
            1, 0, 0, 0, b'a', // token text
            0, 0, 0, 0, // char_start
            1, 0, 0, 0, // char_end
            0x00, 0x00, 0x80, 0x3f, // 1.0f32 LE
            0x00, 0x00, 0x00, 0xc0, // -2.0f32 LE
        ];
        assert_eq!(buf, expected);
    }

    #[test]
    fn truncated_stream_rejected() {
        let docs = sample_docs();
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &docs).unwrap();
        buf.truncate(buf.len() - 7);
        assert!(read_embeddings(buf.as_slice()).is_err());
    }

    #[test]
    fn wrong_magic_rejected() {
        let err = read_embeddings(&b"NOPE\x01\x00\x00\x00"[..]);
        assert!(matches!(err, Err(Error::FileFormat(_))));
    }

    #[test]
    fn index_file_roundtrip_and_rebuild() {
        let enc = ToyEncoder::new(ToyEncoderParams::with_dims(8, 2, 13));
        let texts = ["a group of men play soccer", "blue and red plane"];
        let docs: Vec<StoredDoc> = texts
            .iter()
            .enumerate()
            .map(|(i, text)| {
                let (tokens, matrix) = enc.encode(text).unwrap();
                StoredDoc {
                    text: (*text).to_string(),
                    tokens,
                    matrix: matrix.with_doc_id(format!("d{i}")),
                }
            })
            .collect();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.saix");
        let cfg = SpanConfig::new(1, 4).unwrap();
        write_index_file(
            &path,
            &docs,
            cfg,
            RepresentationStrategy::MeanPool,
            StorageMode::Lazy,
        )
        .unwrap();

        let persisted = read_index_file(&path).unwrap();
        assert_eq!(persisted.config, cfg);
        assert_eq!(persisted.strategy, RepresentationStrategy::MeanPool);
        assert_eq!(persisted.mode, StorageMode::Lazy);
        assert_eq!(persisted.docs.len(), 2);
        assert_eq!(persisted.docs[0].text, texts[0]);

        let indexes = persisted.build().unwrap();
        assert_eq!(indexes[0].doc_id(), "d0");
        // "a group of men play soccer" tokenizes to 6 tokens.
        assert_eq!(indexes[0].span_count(), crate::span::span_count(6, cfg));

        // Rebuilt index equals one built straight from the encoder output.
        let direct = build_span_index(
            &docs[0].tokens,
            &docs[0].matrix,
            cfg,
            RepresentationStrategy::MeanPool,
            StorageMode::Lazy,
        )
        .unwrap();
        for span in direct.spans() {
            assert_eq!(
                direct.span_vector(span).unwrap(),
                indexes[0].span_vector(span).unwrap()
            );
        }
    }
}
