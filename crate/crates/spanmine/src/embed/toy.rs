//! Deterministic toy contextual encoder.
//!
//! Stands in for a real encoder in end-to-end runs: fast, seedable, and
//! reproducible bit-for-bit across platforms. Each token gets a base vector
//! drawn from a PRNG seeded by a published hash of (token text, seed), and a
//! trainable linear layer mixes each base vector with the mean of its window
//! neighbors:
//!
//! ```text
//! v[i] = A * e[i] + B * c[i]
//! ```
//!
//! where `c[i]` is the mean of base vectors at distance <= `window` from `i`
//! (excluding `i` itself; the zero vector when no neighbors exist). `A` and
//! `B` are the parameters the trainer updates.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::text::{tokenize, TokenSequence};

use super::{EmbeddingMatrix, Encoder};

const PARAMS_MAGIC: &[u8; 4] = b"STOY";

/// FNV-1a 64-bit over the token's UTF-8 bytes, then the seed's eight
/// little-endian bytes. Offset basis `0xcbf29ce484222325`, prime
/// `0x100000001b3`. This is the published hash that fixes base vectors
/// across platforms.
pub fn token_hash(text: &str, seed: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &byte in text.as_bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(PRIME);
    }
    for byte in seed.to_le_bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Standard Gaussian pair via Box-Muller on two 53-bit uniforms, so the
/// stream depends only on the ChaCha8 output.
fn gauss_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    const SCALE: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * SCALE; // (0, 1]
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE; // [0, 1)
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

fn gauss_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let (a, b) = gauss_pair(rng);
        out.push(a);
        if out.len() < len {
            out.push(b);
        }
    }
    out
}

/// Parameters of the toy encoder: dimension, neighbor window, seed, and the
/// two mixing matrices (row-major, `dim * dim` each).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoderParams {
    pub dim: usize,
    pub window: usize,
    pub seed: u64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_WINDOW: usize = 2;

// Initialization scales: A stays near the identity so token identity
// dominates, B injects enough context mixing that pooling a span out of a
// noisy context measurably differs from encoding it in isolation.
const A_NOISE: f64 = 0.3;
const B_SCALE: f64 = 1.5;

impl ToyEncoderParams {
    /// Default-size params (`dim = 64`, `window = 2`) with seeded random
    /// initialization.
    pub fn seeded(seed: u64) -> Self {
        Self::with_dims(DEFAULT_DIM, DEFAULT_WINDOW, seed)
    }

    /// Seeded random initialization: `A = I + 0.3 * G / sqrt(dim)` and
    /// `B = 1.5 * G' / sqrt(dim)` with independent standard Gaussian draws.
    pub fn with_dims(dim: usize, window: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(token_hash("toy-params", seed));
        let scale = 1.0 / (dim as f64).sqrt();
        let mut a = gauss_vec(&mut rng, dim * dim);
        for v in &mut a {
            *v *= A_NOISE * scale;
        }
        for i in 0..dim {
            a[i * dim + i] += 1.0;
        }
        let mut b = gauss_vec(&mut rng, dim * dim);
        for v in &mut b {
            *v *= B_SCALE * scale;
        }
        Self {
            dim,
            window,
            seed,
            a,
            b,
        }
    }

    /// `A = I`, `B = 0`: the encoder becomes a pure per-token lookup. With
    /// `window = 0` equal token texts always produce equal rows.
    pub fn identity(dim: usize, window: usize, seed: u64) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Self {
            dim,
            window,
            seed,
            a,
            b: vec![0.0; dim * dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("toy encoder dim must be > 0".into()));
        }
        if self.a.len() != self.dim * self.dim || self.b.len() != self.dim * self.dim {
            return Err(Error::InvalidConfig(format!(
                "mixing matrices must be {0}x{0}",
                self.dim
            )));
        }
        if self.a.iter().chain(self.b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "mixing matrices contain non-finite values".into(),
            ));
        }
        Ok(())
    }

    /// Writes the binary params file: magic `STOY`, dim u32 LE, window u32 LE,
    /// seed u64 LE, then A and B row-major as f64 LE.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(PARAMS_MAGIC)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        w.write_u32::<LittleEndian>(self.window as u32)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        for v in self.a.iter().chain(self.b.iter()) {
            w.write_f64::<LittleEndian>(*v)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PARAMS_MAGIC {
            return Err(Error::FileFormat(format!(
                "bad params magic {magic:?}, expected {PARAMS_MAGIC:?}"
            )));
        }
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let window = r.read_u32::<LittleEndian>()? as usize;
        let seed = r.read_u64::<LittleEndian>()?;
        let read_matrix = |r: &mut dyn Read| -> Result<Vec<f64>> {
            let mut m = vec![0.0f64; dim * dim];
            for v in &mut m {
                *v = r.read_f64::<LittleEndian>()?;
            }
            Ok(m)
        };
        let a = read_matrix(&mut r)?;
        let b = read_matrix(&mut r)?;
        let params = Self {
            dim,
            window,
            seed,
            a,
            b,
        };
        params.validate()?;
        Ok(params)
    }
}

/// One unit-norm base vector per token, a pure function of (token text, seed).
pub fn base_vectors(tokens: &TokenSequence, params: &ToyEncoderParams) -> EmbeddingMatrix {
    let dim = params.dim;
    let mut data = Vec::with_capacity(tokens.len() * dim);
    for tok in tokens.iter() {
        let mut rng = ChaCha8Rng::seed_from_u64(token_hash(&tok.text, params.seed));
        let mut v = gauss_vec(&mut rng, dim);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            v[0] = 1.0;
        } else {
            for x in &mut v {
                *x /= norm;
            }
        }
        data.extend(v.iter().map(|x| *x as f32));
    }
    EmbeddingMatrix::new("", dim, data).expect("base vectors are finite by construction")
}

/// Window-neighbor means for each row of a flat `n x dim` f64 matrix. Row `i`
/// averages rows at distance 1..=window on either side, clipped at the
/// boundaries; rows with no neighbors get the zero vector.
pub(crate) fn context_means(rows: &[f64], n: usize, dim: usize, window: usize) -> Vec<f64> {
    let mut means = vec![0.0f64; n * dim];
    if window == 0 {
        return means;
    }
    for i in 0..n {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(n.saturating_sub(1));
        let count = hi + 1 - lo - 1; // exclude i itself
        if count == 0 {
            continue;
        }
        let out = &mut means[i * dim..(i + 1) * dim];
        for j in lo..=hi {
            if j == i {
                continue;
            }
            let row = &rows[j * dim..(j + 1) * dim];
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in out.iter_mut() {
            *o /= count as f64;
        }
    }
    means
}

pub(crate) fn matvec(m: &[f64], x: &[f64], dim: usize, out: &mut [f64]) {
    for r in 0..dim {
        let row = &m[r * dim..(r + 1) * dim];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        out[r] = acc;
    }
}

/// Applies `v[i] = A * e[i] + B * c[i]` given precomputed f64 base rows and
/// context means. Shared by [`contextualize`] and the trainer so both produce
/// bit-identical forward passes. Errors if a row overflows f32 (runaway
/// parameters during training).
pub(crate) fn contextualize_prepared(
    base: &[f64],
    means: &[f64],
    n: usize,
    params: &ToyEncoderParams,
) -> Result<EmbeddingMatrix> {
    let dim = params.dim;
    let mut data = Vec::with_capacity(n * dim);
    let mut ae = vec![0.0f64; dim];
    let mut bc = vec![0.0f64; dim];
    for i in 0..n {
        matvec(&params.a, &base[i * dim..(i + 1) * dim], dim, &mut ae);
        matvec(&params.b, &means[i * dim..(i + 1) * dim], dim, &mut bc);
        data.extend(ae.iter().zip(&bc).map(|(x, y)| (x + y) as f32));
    }
    EmbeddingMatrix::new("", dim, data)
}

pub(crate) fn rows_to_f64(m: &EmbeddingMatrix) -> Vec<f64> {
    m.data().iter().map(|&v| f64::from(v)).collect()
}

/// Mixes each base row with its window-neighbor mean: `v[i] = A*e[i] + B*c[i]`.
pub fn contextualize(base: &EmbeddingMatrix, params: &ToyEncoderParams) -> Result<EmbeddingMatrix> {
    params.validate()?;
    if base.dim() != params.dim {
        return Err(Error::DimensionMismatch {
            expected: params.dim,
            actual: base.dim(),
        });
    }
    let n = base.len();
    let rows = rows_to_f64(base);
    let means = context_means(&rows, n, params.dim, params.window);
    contextualize_prepared(&rows, &means, n, params)
}

/// The toy encoder: `tokenize` -> base vectors -> contextualize.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    params: ToyEncoderParams,
}

impl ToyEncoder {
    pub fn new(params: ToyEncoderParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &ToyEncoderParams {
        &self.params
    }
}

impl Encoder for ToyEncoder {
    fn id(&self) -> String {
        format!(
            "toy(dim={},window={},seed={})",
            self.params.dim, self.params.window, self.params.seed
        )
    }

    fn dim(&self) -> Option<usize> {
        Some(self.params.dim)
    }

    fn encode(&self, text: &str) -> Result<(TokenSequence, EmbeddingMatrix)> {
        let tokens = tokenize(text);
        let base = base_vectors(&tokens, &self.params);
        let ctx = contextualize(&base, &self.params)?;
        Ok((tokens, ctx))
    }
}
