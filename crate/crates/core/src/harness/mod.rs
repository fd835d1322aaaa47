//! Multi-trajectory comparisons of search methods, trajectory metrics
//! (AUC@k, n-95), and report files.

mod compare;
mod report;
mod stats;

use thiserror::Error;

use crate::engine::EngineError;
use crate::objectives::ObjectiveError;

pub use compare::{
    run_comparison, run_comparison_with, run_trajectory, ComparisonSpec, MatrixSpec, MethodKind,
    MethodReport, MethodSpec,
};
pub use report::{curve_csv, emit_report, summary_csv, ComparisonReport};
pub use stats::{auc_at, best_so_far, mean_curve, n95, N95};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need {needed} trials but the curve has {available}")]
    InsufficientBudget { needed: usize, available: usize },
    #[error("invalid comparison spec: {0}")]
    InvalidSpec(String),
    #[error("method `{method}`: {source}")]
    Method {
        method: String,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
