use std::fmt;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::engine::TrialHistory;

/// `curve[t]` is the best score among the first `t + 1` budgeted trials.
pub fn best_so_far(trials: &TrialHistory) -> Vec<f64> {
    trials.best_so_far()
}

/// Mean of the first `k` points of a best-so-far curve.
pub fn auc_at(curve: &[f64], k: usize) -> Result<f64, HarnessError> {
    if k == 0 || k > curve.len() {
        return Err(HarnessError::InsufficientBudget {
            needed: k,
            available: curve.len(),
        });
    }
    Ok(curve[..k].iter().sum::<f64>() / k as f64)
}

/// Trials needed to reach 95% of the best mean performance of any method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum N95 {
    Reached(usize),
    /// Not reached within the given budget.
    Exceeds(usize),
}

impl fmt::Display for N95 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            N95::Reached(t) => write!(f, "{t}"),
            N95::Exceeds(budget) => write!(f, ">{budget}"),
        }
    }
}

impl Serialize for N95 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for N95 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.strip_prefix('>') {
            Some(rest) => rest.parse().map(N95::Exceeds),
            None => s.parse().map(N95::Reached),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// n-95 for each mean curve. The threshold is `0.95 ×` the highest value
/// any curve attains within `budget`, which presumes positive scores.
pub fn n95(curves: &[&[f64]], budget: usize) -> Vec<N95> {
    let best = curves
        .iter()
        .flat_map(|c| c.iter().take(budget))
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = 0.95 * best;
    curves
        .iter()
        .map(|c| {
            c.iter()
                .take(budget)
                .position(|&v| v >= threshold)
                .map_or(N95::Exceeds(budget), |i| N95::Reached(i + 1))
        })
        .collect()
}

/// Pointwise mean of equally long curves.
pub fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let n = curves.len() as f64;
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|t| curves.iter().map(|c| c[t]).sum::<f64>() / n)
        .collect()
}
