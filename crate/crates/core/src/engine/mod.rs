//! Reparameterized coordinate-descent search, its bounded golden-section line
//! search, and the random-search baseline.

mod cd;
mod line_search;
mod random;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reparam::{HyperConfig, ReparamError};

pub use cd::{coordinate_descent, BudgetPolicy, CdSettings};
pub use line_search::{
    compute_bracket, line_search, LineDomain, LineSearchResult, LineSearchState,
};
pub use random::{random_search, sample_log_uniform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid start: {0}")]
    InvalidStart(String),
    #[error("search direction is zero on every active dimension")]
    InvalidDirection,
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Reparam(#[from] ReparamError),
}

/// One probe of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// Ordinal of the budgeted evaluation, starting at 1. A cached trial
    /// carries the ordinal of the evaluation it reused.
    pub index: usize,
    pub config: HyperConfig<f64>,
    pub score: f64,
    pub cached: bool,
}

/// Summary of one completed line search inside a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub direction: usize,
    pub budget: usize,
    pub fresh: usize,
    pub bracket: (f64, f64),
    pub score_before: f64,
    pub score_after: f64,
    pub incumbent: HyperConfig<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialHistory {
    pub trials: Vec<Trial>,
    pub lines: Vec<LineRecord>,
}

impl TrialHistory {
    pub fn budgeted(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| !t.cached)
    }

    pub fn fresh_count(&self) -> usize {
        self.budgeted().count()
    }

    /// Highest-scoring trial; ties go to the earliest.
    pub fn best(&self) -> Option<&Trial> {
        self.trials
            .iter()
            .fold(None, |best: Option<&Trial>, t| match best {
                Some(b) if b.score >= t.score => Some(b),
                _ => Some(t),
            })
    }

    /// Running maximum over budgeted trials.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.budgeted()
            .scan(f64::NEG_INFINITY, |best, t| {
                *best = best.max(t.score);
                Some(*best)
            })
            .collect()
    }
}

/// Scores already paid for within one trajectory, keyed by `log h`.
#[derive(Debug, Clone, Default)]
pub struct EvalCache {
    entries: Vec<([f64; 3], f64, usize)>,
    fresh: usize,
}

/// Relative tolerance for cache hits in log-h coordinates.
pub const CACHE_TOL: f64 = 1e-9;

impl EvalCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of budgeted evaluations recorded so far.
    pub fn fresh(&self) -> usize {
        self.fresh
    }

    pub fn lookup(&self, h: &HyperConfig<f64>) -> Option<(f64, usize)> {
        let key = h.log();
        self.entries
            .iter()
            .find(|(k, _, _)| {
                k.iter()
                    .zip(key)
                    .all(|(a, b)| (a - b).abs() <= CACHE_TOL * a.abs().max(b.abs()).max(1.0))
            })
            .map(|&(_, s, i)| (s, i))
    }

    /// Records a fresh evaluation and returns its trial ordinal.
    pub fn insert(&mut self, h: &HyperConfig<f64>, score: f64) -> usize {
        self.fresh += 1;
        self.entries.push((h.log(), score, self.fresh));
        self.fresh
    }
}

/// Evaluates `h`, serving repeats from the cache. Objective failures score
/// `-inf`. Returns `None` when a fresh evaluation would exceed `allowance`.
pub(crate) fn probe<O: crate::objectives::Objective + ?Sized>(
    obj: &O,
    h: &HyperConfig<f64>,
    cache: &mut EvalCache,
    allowance: &mut usize,
) -> Option<Trial> {
    if let Some((score, index)) = cache.lookup(h) {
        return Some(Trial {
            index,
            config: *h,
            score,
            cached: true,
        });
    }
    if *allowance == 0 {
        return None;
    }
    *allowance -= 1;
    let score = obj.evaluate(h).unwrap_or(f64::NEG_INFINITY);
    let score = if score.is_nan() {
        f64::NEG_INFINITY
    } else {
        score
    };
    let index = cache.insert(h, score);
    Some(Trial {
        index,
        config: *h,
        score,
        cached: false,
    })
}
