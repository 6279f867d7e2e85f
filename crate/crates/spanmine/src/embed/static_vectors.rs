//! Static word-vector lookup encoder.
//!
//! Reads word2vec-style text files: one token per line followed by `d`
//! decimal floats, space-separated. Lookups are not contextual; tokens
//! outside the vocabulary map to the zero vector (keeping rows aligned with
//! tokens) and are flagged through the log.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{tokenize, TokenSequence};

use super::{EmbeddingMatrix, Encoder};

#[derive(Debug, Clone)]
pub struct StaticVectorEncoder {
    source: String,
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl StaticVectorEncoder {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(std::fs::File::open(path)?);
        Self::from_reader(reader, &path.display().to_string())
    }

    pub fn from_reader(reader: impl BufRead, source: &str) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut dim = 0usize;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts
                .next()
                .ok_or_else(|| Error::DataFormat {
                    path: source.to_string(),
                    line: line_no,
                    message: "missing token".into(),
                })?
                .to_string();
            let values: Vec<f32> = parts
                .map(|p| {
                    p.parse::<f32>().map_err(|_| Error::DataFormat {
                        path: source.to_string(),
                        line: line_no,
                        message: format!("unparsable float '{p}'"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::DataFormat {
                    path: source.to_string(),
                    line: line_no,
                    message: "empty or non-finite vector".into(),
                });
            }
            if dim == 0 {
                dim = values.len();
            } else if values.len() != dim {
                return Err(Error::DataFormat {
                    path: source.to_string(),
                    line: line_no,
                    message: format!("dimension {} != {dim}", values.len()),
                });
            }
            vectors.insert(token, values);
        }
        if vectors.is_empty() {
            return Err(Error::EmptyInput("static vector file has no entries"));
        }
        Ok(Self {
            source: source.to_string(),
            dim,
            vectors,
        })
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vectors.len()
    }

    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Embeds a tokenized sequence, returning the indices of tokens that fell
    /// back to the zero vector.
    pub fn encode_tokens(&self, tokens: &TokenSequence) -> (EmbeddingMatrix, Vec<usize>) {
        let mut data = Vec::with_capacity(tokens.len() * self.dim);
        let mut oov = Vec::new();
        for (i, tok) in tokens.iter().enumerate() {
            match self.vectors.get(&tok.text) {
                Some(v) => data.extend_from_slice(v),
                None => {
                    oov.push(i);
                    data.extend(std::iter::repeat_n(0.0f32, self.dim));
                }
            }
        }
        let matrix =
            EmbeddingMatrix::new("", self.dim, data).expect("static vectors validated at load");
        (matrix, oov)
    }
}

impl Encoder for StaticVectorEncoder {
    fn id(&self) -> String {
        format!("static:{}", self.source)
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn encode(&self, text: &str) -> Result<(TokenSequence, EmbeddingMatrix)> {
        let tokens = tokenize(text);
        let (matrix, oov) = self.encode_tokens(&tokens);
        if !oov.is_empty() {
            let names: Vec<&str> = oov.iter().map(|&i| tokens[i].text.as_str()).collect();
            log::warn!(
                "static vectors: {} out-of-vocabulary token(s) {:?} mapped to zero",
                oov.len(),
                names
            );
        }
        Ok((tokens, matrix))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const FILE: &str = "alpha 1.0 0.0 0.0\nbeta 0.0 1.0 0.0\ngamma 0.0 0.0 1.0\n";

    #[test]
    fn known_tokens_get_their_rows() {
        let enc = StaticVectorEncoder::from_reader(Cursor::new(FILE), "mem").unwrap();
        assert_eq!(enc.dim(), Some(3));
        assert_eq!(enc.vocabulary_len(), 3);
        let (tokens, m) = enc.encode("beta alpha").unwrap();
        assert_eq!(tokens.len(), 2);
        assert_eq!(m.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(m.row(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_tokens_become_zero_rows() {
        let enc = StaticVectorEncoder::from_reader(Cursor::new(FILE), "mem").unwrap();
        let (tokens, oov) = {
            let t = tokenize("alpha unknown gamma");
            let (m, oov) = enc.encode_tokens(&t);
            assert_eq!(m.row(1), &[0.0, 0.0, 0.0]);
            (t, oov)
        };
        assert_eq!(oov, vec![1]);
        assert_eq!(tokens.len(), 3);
    }

    #[test]
    fn ragged_file_rejected() {
        let bad = "alpha 1.0 2.0\nbeta 1.0\n";
        assert!(StaticVectorEncoder::from_reader(Cursor::new(bad), "mem").is_err());
        let nan = "alpha NaN 1.0\n";
        assert!(StaticVectorEncoder::from_reader(Cursor::new(nan), "mem").is_err());
        assert!(StaticVectorEncoder::from_reader(Cursor::new(""), "mem").is_err());
    }
}
