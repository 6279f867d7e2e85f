//! Correlation statistics: Pearson, Spearman (mean ranks for ties), and
//! Williams' t-test for comparing two dependent correlations that share a
//! variable.

pub mod special;

use crate::error::{Error, Result};

/// Pearson and Spearman correlations over one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub pearson: f64,
    pub spearman: f64,
    pub n: usize,
}

fn validate_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::SampleTooSmall(x.len(), 3));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("samples contain non-finite values".into()));
    }
    Ok(())
}

fn is_constant(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

/// Sample Pearson correlation at 64-bit precision.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    validate_pair(x, y)?;
    if is_constant(x) {
        return Err(Error::DegenerateVariance("first sample"));
    }
    if is_constant(y) {
        return Err(Error::DegenerateVariance("second sample"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance("sample"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks (1-based); tied values share the mean of their rank range.
pub fn rank_average(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite values"));
    let mut ranks = vec![0.0f64; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) tie; mean 1-based rank.
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average-ranked data.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    validate_pair(x, y)?;
    pearson(&rank_average(x), &rank_average(y))
}

/// Both correlations for one prediction/gold pair.
pub fn correlation_report(x: &[f64], y: &[f64]) -> Result<CorrelationReport> {
    Ok(CorrelationReport {
        pearson: pearson(x, y)?,
        spearman: spearman(x, y)?,
        n: x.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilliamsResult {
    pub t: f64,
    pub p: f64,
}

/// Williams' t-test (Steiger's formulation) for the difference between two
/// dependent correlations `r12` and `r13` sharing variable 1, given the
/// correlation `r23` between variables 2 and 3:
///
/// ```text
/// t = (r12 - r13) * sqrt( (n-1)(1+r23) / (2K(n-1)/(n-3) + rbar^2 (1-r23)^3) )
/// K = 1 - r12^2 - r13^2 - r23^2 + 2*r12*r13*r23,   rbar = (r12 + r13) / 2
/// ```
///
/// Two-tailed p from Student's t with `n - 3` degrees of freedom. Equal
/// correlations short-circuit to `(t, p) = (0, 1)`.
pub fn williams_test(r12: f64, r13: f64, r23: f64, n: usize) -> Result<WilliamsResult> {
    for r in [r12, r13, r23] {
        if !r.is_finite() || r.abs() >= 1.0 {
            return Err(Error::CorrelationOutOfRange(r));
        }
    }
    if n < 4 {
        return Err(Error::SampleTooSmall(n, 4));
    }
    if r12 == r13 {
        return Ok(WilliamsResult { t: 0.0, p: 1.0 });
    }
    let nf = n as f64;
    let k = 1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23;
    let rbar = 0.5 * (r12 + r13);
    let denom = 2.0 * k * (nf - 1.0) / (nf - 3.0) + rbar * rbar * (1.0 - r23).powi(3);
    if denom <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "correlations (r12={r12}, r13={r13}, r23={r23}) are not jointly realizable"
        )));
    }
    let t = (r12 - r13) * ((nf - 1.0) * (1.0 + r23) / denom).sqrt();
    // Extreme |t| underflows the tail to 0.0; keep p strictly positive.
    let p = special::student_t_two_tailed(t, n - 3).max(f64::MIN_POSITIVE);
    Ok(WilliamsResult { t, p })
}
