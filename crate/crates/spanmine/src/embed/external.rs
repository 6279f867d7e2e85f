//! External encoder exchange protocol.
//!
//! Line-delimited JSON over stdio or a request/response file pair. One
//! request per line:
//!
//! ```text
//! {"id": "0", "text": "a group of men"}
//! ```
//!
//! and one response line per request, order-preserving:
//!
//! ```text
//! {"id": "0", "tokens": [{"text": "a", "start": 0, "end": 1}, ...],
//!  "vectors": [[0.25, -1.5, ...], ...]}
//! ```
//!
//! Token offsets are character indices into the request text; `vectors` must
//! hold one row per token, all rows the same dimension, every entry finite.
//! Responses are validated against the same token-sequence invariants the
//! built-in tokenizer guarantees.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{Token, TokenSequence};

use super::{EmbeddingMatrix, Encoder};

#[derive(Debug, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProtocolToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub id: String,
    pub tokens: Vec<ProtocolToken>,
    pub vectors: Vec<Vec<f64>>,
}

/// Converts a validated response into aligned tokens and embeddings.
pub fn response_to_embedding(resp: &EncodeResponse) -> Result<(TokenSequence, EmbeddingMatrix)> {
    if resp.tokens.len() != resp.vectors.len() {
        return Err(Error::Protocol(format!(
            "response '{}': {} tokens but {} vectors",
            resp.id,
            resp.tokens.len(),
            resp.vectors.len()
        )));
    }
    let tokens = TokenSequence::new(
        resp.tokens
            .iter()
            .map(|t| Token {
                text: t.text.clone(),
                char_start: t.start,
                char_end: t.end,
            })
            .collect(),
    )?;
    let dim = resp.vectors.first().map(Vec::len).unwrap_or(1);
    let mut data = Vec::with_capacity(resp.vectors.len() * dim);
    for row in &resp.vectors {
        if row.len() != dim {
            return Err(Error::Protocol(format!(
                "response '{}': ragged vector rows ({} vs {dim})",
                resp.id,
                row.len()
            )));
        }
        data.extend(row.iter().map(|&v| v as f32));
    }
    let matrix = EmbeddingMatrix::new(resp.id.clone(), dim, data)?;
    Ok((tokens, matrix))
}

/// Writes one request per line.
pub fn write_requests<W: Write>(mut w: W, items: &[EncodeRequest]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads response lines, in order.
pub fn read_responses<R: BufRead>(r: R) -> Result<Vec<EncodeResponse>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Serves the protocol with a local encoder: reads request lines from `r`,
/// writes one response line per request to `w`. Returns the number served.
/// This is both the reference implementation for protocol authors and the
/// stub behind `spanmine extern-stub`.
pub fn respond_with_encoder<R: BufRead, W: Write>(
    r: R,
    mut w: W,
    encoder: &dyn Encoder,
) -> Result<usize> {
    let mut served = 0usize;
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: EncodeRequest = serde_json::from_str(&line)?;
        let (tokens, matrix) = encoder.encode(&req.text)?;
        let resp = EncodeResponse {
            id: req.id,
            tokens: tokens
                .iter()
                .map(|t| ProtocolToken {
                    text: t.text.clone(),
                    start: t.char_start,
                    end: t.char_end,
                })
                .collect(),
            vectors: matrix
                .rows()
                .map(|row| row.iter().map(|&v| f64::from(v)).collect())
                .collect(),
        };
        serde_json::to_writer(&mut w, &resp)?;
        w.write_all(b"\n")?;
        served += 1;
    }
    w.flush()?;
    Ok(served)
}

/// File-pair flow: writes the request file for a batch of texts. A separate
/// process produces the matching response file, consumed by
/// [`read_response_file`].
pub fn write_request_file(path: impl AsRef<Path>, texts: &[&str]) -> Result<Vec<String>> {
    let items: Vec<EncodeRequest> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| EncodeRequest {
            id: i.to_string(),
            text: (*t).to_string(),
        })
        .collect();
    write_requests(std::io::BufWriter::new(std::fs::File::create(path)?), &items)?;
    Ok(items.into_iter().map(|i| i.id).collect())
}

pub fn read_response_file(
    path: impl AsRef<Path>,
    expected_ids: &[String],
) -> Result<Vec<(TokenSequence, EmbeddingMatrix)>> {
    let responses = read_responses(BufReader::new(std::fs::File::open(path)?))?;
    check_and_convert(responses, expected_ids)
}

fn check_and_convert(
    responses: Vec<EncodeResponse>,
    expected_ids: &[String],
) -> Result<Vec<(TokenSequence, EmbeddingMatrix)>> {
    if responses.len() != expected_ids.len() {
        return Err(Error::Protocol(format!(
            "expected {} responses, received {}",
            expected_ids.len(),
            responses.len()
        )));
    }
    responses
        .iter()
        .zip(expected_ids)
        .map(|(resp, want)| {
            if &resp.id != want {
                return Err(Error::Protocol(format!(
                    "out-of-order response: expected id '{want}', got '{}'",
                    resp.id
                )));
            }
            response_to_embedding(resp)
        })
        .collect()
}

/// Bridges to an external encoder process over stdio. The command line is
/// split on whitespace; each batch spawns a fresh process, writes all
/// requests, closes stdin, and reads the responses.
#[derive(Debug, Clone)]
pub struct ExternalEncoder {
    raw: String,
    program: String,
    args: Vec<String>,
}

impl ExternalEncoder {
    pub fn from_command_line(cmd: &str) -> Result<Self> {
        let mut parts = cmd.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty external encoder command".into()))?
            .to_string();
        Ok(Self {
            raw: cmd.to_string(),
            program,
            args: parts.map(str::to_string).collect(),
        })
    }

    fn run_batch(&self, texts: &[&str]) -> Result<Vec<(TokenSequence, EmbeddingMatrix)>> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Protocol(format!("failed to spawn '{}': {e}", self.raw)))?;

        let requests: Vec<EncodeRequest> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| EncodeRequest {
                id: i.to_string(),
                text: (*t).to_string(),
            })
            .collect();
        let expected: Vec<String> = requests.iter().map(|r| r.id.clone()).collect();

        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        // Feed requests from a second thread so a full stdout pipe cannot
        // deadlock against an unread stdin pipe.
        let responses = std::thread::scope(|scope| -> Result<Vec<EncodeResponse>> {
            let writer = scope.spawn(move || write_requests(stdin, &requests));
            let responses = read_responses(BufReader::new(stdout));
            writer
                .join()
                .map_err(|_| Error::Protocol("request writer panicked".into()))??;
            responses
        })?;

        let output = child
            .wait_with_output()
            .map_err(|e| Error::Protocol(format!("external encoder wait failed: {e}")))?;
        if !output.status.success() {
            return Err(Error::Protocol(format!(
                "external encoder '{}' exited with {}: {}",
                self.raw,
                output.status,
                String::from_utf8_lossy(&output.stderr)
            )));
        }
        check_and_convert(responses, &expected)
    }
}

impl Encoder for ExternalEncoder {
    fn id(&self) -> String {
        format!("extern:{}", self.raw)
    }

    fn dim(&self) -> Option<usize> {
        None
    }

    fn encode(&self, text: &str) -> Result<(TokenSequence, EmbeddingMatrix)> {
        Ok(self.run_batch(&[text])?.into_iter().next().expect("one response"))
    }

    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<(TokenSequence, EmbeddingMatrix)>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        self.run_batch(texts)
    }
}
