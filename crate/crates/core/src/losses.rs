//! Positive / entropy decomposition of the contrastive margin loss and of
//! InfoNCE, computed from a labeled pairwise-distance matrix.
//!
//! Both losses are reduced to a [`TermPair`] `(ℓ̄p, ℓ̄e)`; the batch loss is
//! then `λp·ℓ̄p + λe·ℓ̄e` for some [`BalanceCoeffs`]. The classic global and
//! separate averaging schemes are two particular choices of coefficients.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSet {
    Positive,
    Negative,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("degenerate batch: no {} pairs", match .missing { PairSet::Positive => "positive", PairSet::Negative => "negative" })]
    DegenerateBatch { missing: PairSet },
    #[error("degenerate batch: {0}")]
    DegenerateSize(String),
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("invalid loss parameters: {0}")]
    InvalidParams(String),
    #[error("cannot read batch: {0}")]
    Parse(String),
}

/// Class labels with the matrix `M_ij = d(z_i, z_j)` of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch<T> {
    labels: Vec<i64>,
    distances: Vec<T>,
    mask: Option<Vec<bool>>,
}

impl<T: Real> LabeledBatch<T> {
    pub fn new(labels: Vec<i64>, distances: Vec<Vec<T>>) -> Result<Self, LossError> {
        let b = labels.len();
        if b < 2 {
            return Err(LossError::InvalidBatch(format!(
                "need at least 2 samples, got {b}"
            )));
        }
        if distances.len() != b || distances.iter().any(|row| row.len() != b) {
            return Err(LossError::InvalidBatch(format!(
                "distance matrix must be {b}x{b}"
            )));
        }
        let tol = T::lit(SYMMETRY_TOL);
        for (i, row) in distances.iter().enumerate() {
            if row[i] != T::zero() {
                return Err(LossError::InvalidBatch(format!(
                    "diagonal entry ({i},{i}) is not zero"
                )));
            }
            for (j, &d) in row.iter().enumerate() {
                if !d.is_finite() || d < T::zero() {
                    return Err(LossError::InvalidBatch(format!(
                        "entry ({i},{j}) = {d} is not a finite nonnegative distance"
                    )));
                }
                if (d - distances[j][i]).abs() > tol {
                    return Err(LossError::InvalidBatch(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            labels,
            distances: distances.into_iter().flatten().collect(),
            mask: None,
        })
    }

    /// Restricts the pairs entering every loss term; `mask[i][j] == false`
    /// drops the ordered pair `(i, j)`.
    pub fn with_mask(mut self, mask: Vec<Vec<bool>>) -> Result<Self, LossError> {
        let b = self.len();
        if mask.len() != b || mask.iter().any(|row| row.len() != b) {
            return Err(LossError::InvalidBatch(format!("mask must be {b}x{b}")));
        }
        self.mask = Some(mask.into_iter().flatten().collect());
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn distance(&self, i: usize, j: usize) -> T {
        self.distances[i * self.len() + j]
    }

    fn keeps(&self, i: usize, j: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[i * self.len() + j])
    }

    /// Reads `{"labels": [...], "distances": [[...], ...]}` or a CSV file with
    /// one `label,d_i1,...,d_ib` row per sample.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LossError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LossError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LossError> {
        if text.trim_start().starts_with('{') {
            #[derive(Deserialize)]
            struct Doc {
                labels: Vec<i64>,
                distances: Vec<Vec<f64>>,
            }
            let doc: Doc =
                serde_json::from_str(text).map_err(|e| LossError::Parse(e.to_string()))?;
            let d = doc
                .distances
                .into_iter()
                .map(|row| row.into_iter().map(T::lit).collect())
                .collect();
            return Self::new(doc.labels, d);
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for (n, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| LossError::Parse(format!("row {}: {e}", n + 1)))?;
            let mut fields = rec.iter();
            let label = fields
                .next()
                .and_then(|s| s.parse::<i64>().ok())
                .ok_or_else(|| LossError::Parse(format!("row {}: bad label", n + 1)))?;
            let row = fields
                .map(|s| s.parse::<f64>().map(T::lit))
                .collect::<Result<Vec<T>, _>>()
                .map_err(|e| LossError::Parse(format!("row {}: {e}", n + 1)))?;
            labels.push(label);
            rows.push(row);
        }
        Self::new(labels, rows)
    }
}

/// Margin `m` and exponent `q` of `ℓp = d^q`, `ℓe = max(0, m - d)^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams<T> {
    pub margin: T,
    pub exponent: u32,
}

impl<T: Real> MarginParams<T> {
    pub fn new(margin: T, exponent: u32) -> Result<Self, LossError> {
        if !(margin.is_finite() && margin > T::zero()) {
            return Err(LossError::InvalidParams(format!(
                "margin must be > 0, got {margin}"
            )));
        }
        if !matches!(exponent, 1 | 2) {
            return Err(LossError::InvalidParams(format!(
                "exponent must be 1 or 2, got {exponent}"
            )));
        }
        Ok(Self { margin, exponent })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoNceParams<T> {
    pub temperature: T,
}

impl<T: Real> InfoNceParams<T> {
    pub fn new(temperature: T) -> Result<Self, LossError> {
        if !(temperature.is_finite() && temperature > T::zero()) {
            return Err(LossError::InvalidParams(format!(
                "temperature must be > 0, got {temperature}"
            )));
        }
        Ok(Self { temperature })
    }
}

/// Weights `(λp, λe)` of the positive and entropy terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceCoeffs<T> {
    pub lambda_p: T,
    pub lambda_e: T,
}

impl<T: Real> BalanceCoeffs<T> {
    pub fn new(lambda_p: T, lambda_e: T) -> Result<Self, LossError> {
        let ok = |x: T| x.is_finite() && x >= T::zero();
        if !ok(lambda_p) || !ok(lambda_e) {
            return Err(LossError::InvalidParams(
                "balance coefficients must be finite and nonnegative".into(),
            ));
        }
        if lambda_p == T::zero() && lambda_e == T::zero() {
            return Err(LossError::InvalidParams(
                "balance coefficients cannot both be zero".into(),
            ));
        }
        Ok(Self { lambda_p, lambda_e })
    }
}

/// Batch-averaged positive and entropy terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermPair<T> {
    pub pos_term: T,
    pub ent_term: T,
}

/// Ordered off-diagonal index pairs split by label agreement.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairPartition {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

/// Splits all ordered pairs `(i, j)`, `i != j`, into same-label and
/// different-label pairs.
pub fn partition_pairs(labels: &[i64]) -> Result<PairPartition, LossError> {
    partition_masked(labels, |_, _| true)
}

fn partition_masked(
    labels: &[i64],
    keep: impl Fn(usize, usize) -> bool,
) -> Result<PairPartition, LossError> {
    let b = labels.len();
    if b < 2 {
        return Err(LossError::DegenerateSize(format!(
            "need at least 2 samples, got {b}"
        )));
    }
    let mut out = PairPartition::default();
    for i in 0..b {
        for j in 0..b {
            if i == j || !keep(i, j) {
                continue;
            }
            if labels[i] == labels[j] {
                out.positives.push((i, j));
            } else {
                out.negatives.push((i, j));
            }
        }
    }
    if out.positives.is_empty() {
        return Err(LossError::DegenerateBatch {
            missing: PairSet::Positive,
        });
    }
    if out.negatives.is_empty() {
        return Err(LossError::DegenerateBatch {
            missing: PairSet::Negative,
        });
    }
    Ok(out)
}

fn batch_pairs<T: Real>(batch: &LabeledBatch<T>) -> Result<PairPartition, LossError> {
    partition_masked(&batch.labels, |i, j| batch.keeps(i, j))
}

fn mean<T: Real>(sum: T, n: usize) -> T {
    sum / T::from_count(n)
}

/// `ℓ̄p = mean_P d^q`, `ℓ̄e = mean_E max(0, m - d)^q`.
pub fn margin_terms<T: Real>(
    batch: &LabeledBatch<T>,
    params: &MarginParams<T>,
) -> Result<TermPair<T>, LossError> {
    let pairs = batch_pairs(batch)?;
    let q = params.exponent as i32;
    let pos: T = pairs
        .positives
        .iter()
        .map(|&(i, j)| batch.distance(i, j).powi(q))
        .fold(T::zero(), |a, x| a + x);
    let ent: T = pairs
        .negatives
        .iter()
        .map(|&(i, j)| {
            (params.margin - batch.distance(i, j))
                .max(T::zero())
                .powi(q)
        })
        .fold(T::zero(), |a, x| a + x);
    Ok(TermPair {
        pos_term: mean(pos, pairs.positives.len()),
        ent_term: mean(ent, pairs.negatives.len()),
    })
}

/// InfoNCE split into `mean_P d_ij/τ` and
/// `mean_P log Σ_{k ∈ K_ij} exp(-d_ik/τ)` with `K_ij = {j} ∪ {k : y_k != y_i}`.
pub fn infonce_terms<T: Real>(
    batch: &LabeledBatch<T>,
    params: &InfoNceParams<T>,
) -> Result<TermPair<T>, LossError> {
    let pairs = batch_pairs(batch)?;
    let tau = params.temperature;
    let b = batch.len();
    let mut pos = T::zero();
    let mut ent = T::zero();
    let mut logits = Vec::with_capacity(b);
    for &(i, j) in &pairs.positives {
        pos = pos + batch.distance(i, j) / tau;
        logits.clear();
        logits.push(-batch.distance(i, j) / tau);
        logits.extend(
            (0..b)
                .filter(|&k| batch.labels[k] != batch.labels[i] && batch.keeps(i, k))
                .map(|k| -batch.distance(i, k) / tau),
        );
        ent = ent + log_sum_exp(&logits);
    }
    let n = pairs.positives.len();
    Ok(TermPair {
        pos_term: mean(pos, n),
        ent_term: mean(ent, n),
    })
}

fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = xs
        .iter()
        .map(|&x| (x - max).exp())
        .fold(T::zero(), |a, x| a + x);
    max + sum.ln()
}

/// `λp·ℓ̄p + λe·ℓ̄e`.
pub fn combine<T: Real>(t: &TermPair<T>, c: &BalanceCoeffs<T>) -> T {
    c.lambda_p * t.pos_term + c.lambda_e * t.ent_term
}

/// Coefficients that reproduce the mean over all ordered pairs for a
/// two-per-class batch of size `b`: `(1/(b-1), 1 - 1/(b-1))`.
pub fn global_average_coeffs<T: Real>(b: usize) -> Result<BalanceCoeffs<T>, LossError> {
    if b < 3 {
        return Err(LossError::DegenerateSize(format!(
            "global averaging needs b >= 3, got {b}"
        )));
    }
    let lp = T::one() / T::from_count(b - 1);
    BalanceCoeffs::new(lp, T::one() - lp)
}

/// Global-average coefficients for arbitrary label structure, from the
/// actual pair counts: `(|P|, |E|) / (|P| + |E|)`.
pub fn global_average_coeffs_from_counts<T: Real>(
    n_pos: usize,
    n_neg: usize,
) -> Result<BalanceCoeffs<T>, LossError> {
    if n_pos == 0 {
        return Err(LossError::DegenerateBatch {
            missing: PairSet::Positive,
        });
    }
    if n_neg == 0 {
        return Err(LossError::DegenerateBatch {
            missing: PairSet::Negative,
        });
    }
    let total = T::from_count(n_pos + n_neg);
    BalanceCoeffs::new(T::from_count(n_pos) / total, T::from_count(n_neg) / total)
}

pub fn separate_average_coeffs<T: Real>() -> BalanceCoeffs<T> {
    BalanceCoeffs {
        lambda_p: T::one(),
        lambda_e: T::one(),
    }
}
