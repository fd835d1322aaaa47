//! Average-precision family for ranked retrieval: AP, AP-topR (mean: R-mAP)
//! and AP@R (mean: mAP@R).
//!
//! All functions are generic over [`Scalar`], so they can be evaluated with
//! exact rationals as well as floats.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("no relevant items in ranking")]
    NoRelevantItems,
    #[error("invalid relevance list: {0}")]
    InvalidRelevance(String),
    #[error("unknown metric `{0}` (expected ap, ap-top-r or ap-at-r)")]
    UnknownMetric(String),
}

/// Binary relevance of candidates, in decreasing order of retrieval score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedRelevance(Vec<bool>);

impl RankedRelevance {
    pub fn new(rel: Vec<bool>) -> Result<Self, MetricError> {
        if rel.is_empty() {
            return Err(MetricError::InvalidRelevance("empty ranking".into()));
        }
        Ok(Self(rel))
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self, MetricError> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(MetricError::InvalidRelevance(format!(
                    "entries must be 0 or 1, got {other}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .and_then(Self::new)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `R_q`, the number of relevant candidates.
    pub fn relevant_count(&self) -> usize {
        self.0.iter().filter(|&&r| r).count()
    }
}

fn from_count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable")
}

/// Σ_{k ≤ cutoff} P(k)·rel(k) together with the number of relevant items seen.
fn precision_sum<T: Scalar>(rel: &[bool], cutoff: usize) -> (T, usize) {
    let mut hits = 0usize;
    let mut sum = T::zero();
    for (k, &r) in rel.iter().take(cutoff).enumerate() {
        if r {
            hits += 1;
            sum = sum + from_count::<T>(hits) / from_count::<T>(k + 1);
        }
    }
    (sum, hits)
}

fn relevant_or_err(r: &RankedRelevance) -> Result<usize, MetricError> {
    match r.relevant_count() {
        0 => Err(MetricError::NoRelevantItems),
        n => Ok(n),
    }
}

/// `AP = (1/R_q) Σ_k P(k)·rel(k)` over the whole list.
pub fn average_precision<T: Scalar>(r: &RankedRelevance) -> Result<T, MetricError> {
    let rq = relevant_or_err(r)?;
    let (sum, _) = precision_sum::<T>(&r.0, r.len());
    Ok(sum / from_count(rq))
}

/// AP of the list truncated to its first `R_q` entries; the denominator is
/// the number of relevant items inside the truncated list. Zero when the
/// truncated list holds no relevant item.
pub fn ap_top_r<T: Scalar>(r: &RankedRelevance) -> Result<T, MetricError> {
    let rq = relevant_or_err(r)?;
    let (sum, hits) = precision_sum::<T>(&r.0, rq);
    if hits == 0 {
        return Ok(T::zero());
    }
    Ok(sum / from_count(hits))
}

/// `AP@R = (1/R_q) Σ_{k ≤ R_q} P(k)·rel(k)`.
pub fn ap_at_r<T: Scalar>(r: &RankedRelevance) -> Result<T, MetricError> {
    let rq = relevant_or_err(r)?;
    let (sum, _) = precision_sum::<T>(&r.0, rq);
    Ok(sum / from_count(rq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Ap,
    ApTopR,
    ApAtR,
}

impl MetricKind {
    pub fn eval<T: Scalar>(self, r: &RankedRelevance) -> Result<T, MetricError> {
        match self {
            MetricKind::Ap => average_precision(r),
            MetricKind::ApTopR => ap_top_r(r),
            MetricKind::ApAtR => ap_at_r(r),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ap => "ap",
            MetricKind::ApTopR => "ap-top-r",
            MetricKind::ApAtR => "ap-at-r",
        }
    }
}

impl FromStr for MetricKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ap" => Ok(MetricKind::Ap),
            "ap-top-r" | "ap-topr" | "r-map" => Ok(MetricKind::ApTopR),
            "ap-at-r" | "ap@r" | "map@r" => Ok(MetricKind::ApAtR),
            other => Err(MetricError::UnknownMetric(other.to_string())),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rankings for a set of queries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuerySetResult {
    pub queries: Vec<RankedRelevance>,
}

/// Mean of a metric over queries, plus how many zero-relevant queries were
/// left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanMetric<T> {
    pub mean: T,
    pub skipped: usize,
}

impl QuerySetResult {
    pub fn new(queries: Vec<RankedRelevance>) -> Self {
        Self { queries }
    }

    /// Reads one query per CSV row of `0`/`1` entries; rows may differ in length.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MetricError::InvalidRelevance(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, MetricError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut queries = Vec::new();
        for (n, rec) in reader.records().enumerate() {
            let rec =
                rec.map_err(|e| MetricError::InvalidRelevance(format!("row {}: {e}", n + 1)))?;
            let bits = rec
                .iter()
                .filter(|f| !f.is_empty())
                .map(|f| f.parse::<u8>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| MetricError::InvalidRelevance(format!("row {}: {e}", n + 1)))?;
            let q = RankedRelevance::from_bits(&bits)
                .map_err(|e| MetricError::InvalidRelevance(format!("row {}: {e}", n + 1)))?;
            queries.push(q);
        }
        Ok(Self { queries })
    }

    /// Per-query values; `None` for queries with no relevant item.
    pub fn per_query<T: Scalar>(&self, which: MetricKind) -> Vec<Option<T>> {
        self.queries.iter().map(|q| which.eval(q).ok()).collect()
    }

    pub fn mean_metric<T: Scalar>(&self, which: MetricKind) -> Result<MeanMetric<T>, MetricError> {
        let mut sum = T::zero();
        let mut used = 0usize;
        let mut skipped = 0usize;
        for q in &self.queries {
            match which.eval::<T>(q) {
                Ok(v) => {
                    sum = sum + v;
                    used += 1;
                }
                Err(MetricError::NoRelevantItems) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if used == 0 {
            return Err(MetricError::NoRelevantItems);
        }
        Ok(MeanMetric {
            mean: sum / from_count(used),
            skipped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn r(bits: &[u8]) -> RankedRelevance {
        RankedRelevance::from_bits(bits).unwrap()
    }

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision::<Q>(&r(&[1, 0, 1])).unwrap(), q(5, 6));
        assert_eq!(average_precision::<Q>(&r(&[1, 1, 0, 0])).unwrap(), q(1, 1));
        assert_eq!(average_precision::<Q>(&r(&[0, 0, 1])).unwrap(), q(1, 3));
        assert_eq!(
            average_precision::<f64>(&r(&[0, 0, 0])),
            Err(MetricError::NoRelevantItems)
        );
    }

    #[test]
    fn ap_top_r_examples() {
        assert_eq!(ap_top_r::<Q>(&r(&[1, 0, 1])).unwrap(), q(1, 1));
        assert_eq!(ap_top_r::<Q>(&r(&[0, 1, 1])).unwrap(), q(1, 2));
        assert_eq!(ap_top_r::<Q>(&r(&[1, 1, 0])).unwrap(), q(1, 1));
        // nothing relevant in the top R_q = 1
        assert_eq!(ap_top_r::<Q>(&r(&[0, 1])).unwrap(), q(0, 1));
    }

    #[test]
    fn ap_at_r_examples() {
        assert_eq!(ap_at_r::<Q>(&r(&[1, 0, 1])).unwrap(), q(1, 2));
        assert_eq!(ap_at_r::<Q>(&r(&[1, 1, 0])).unwrap(), q(1, 1));
        assert_eq!(ap_at_r::<Q>(&r(&[0, 1, 1])).unwrap(), q(1, 4));
    }

    #[test]
    fn means_and_skips() {
        let qs = QuerySetResult::new(vec![r(&[1, 0, 1]), r(&[1, 1, 0])]);
        assert_eq!(
            qs.mean_metric::<Q>(MetricKind::ApTopR).unwrap().mean,
            q(1, 1)
        );
        assert_eq!(
            qs.mean_metric::<Q>(MetricKind::ApAtR).unwrap().mean,
            q(3, 4)
        );
        let qs = QuerySetResult::new(vec![r(&[0, 0, 0]), r(&[1])]);
        let m = qs.mean_metric::<f64>(MetricKind::Ap).unwrap();
        assert_eq!((m.mean, m.skipped), (1.0, 1));
        let qs = QuerySetResult::new(vec![r(&[0, 0])]);
        assert_eq!(
            qs.mean_metric::<f64>(MetricKind::Ap),
            Err(MetricError::NoRelevantItems)
        );
    }

    #[test]
    fn recall_increment_form_agrees() {
        // AP = Σ_k P(k)·ΔRecall(k)
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = rng.gen_range(1..40);
            let mut bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            bits[rng.gen_range(0..n)] = 1;
            let rel = r(&bits);
            let rq = rel.relevant_count() as f64;
            let mut hits = 0.0;
            let mut prev_recall = 0.0;
            let mut ap = 0.0;
            for (k, &b) in bits.iter().enumerate() {
                hits += b as f64;
                let recall = hits / rq;
                ap += hits / (k + 1) as f64 * (recall - prev_recall);
                prev_recall = recall;
            }
            let got: f64 = average_precision(&rel).unwrap();
            assert!((got - ap).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_rows() {
        let qs = QuerySetResult::parse("1,0,1\n# comment\n0,1\n").unwrap();
        assert_eq!(qs.queries.len(), 2);
        assert_eq!(qs.queries[1], r(&[0, 1]));
        assert!(QuerySetResult::parse("1,2\n").is_err());
        assert!("ap@r".parse::<MetricKind>().is_ok());
        assert!("ndcg".parse::<MetricKind>().is_err());
    }
}
