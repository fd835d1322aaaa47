//! Objective functions `M(h)` over the hyperparameter space; higher is better.

mod external;
mod grid;
mod synthetic;

use std::sync::Arc;

use thiserror::Error;

use crate::reparam::HyperConfig;

pub use external::{external_eval, round_batch_size, ExternalCommandSpec, ExternalObjective};
pub use grid::{
    grid_from_csv, grid_interpolate, grid_load, grid_save, grid_to_csv, PerformanceGrid,
};
pub use synthetic::{synthetic_eval, Perturbation, SyntheticLandscape};

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("configuration {0:?} lies outside the grid")]
    OutOfDomain([f64; 3]),
    #[error("command exited with {status}: {stderr}")]
    CommandFailed { status: String, stderr: String },
    #[error("cannot parse score from command output line `{0}`")]
    ParseFailed(String),
    #[error("command timed out after {0:?}")]
    TimedOut(std::time::Duration),
    #[error("cannot spawn command: {0}")]
    Spawn(#[source] std::io::Error),
    #[error("{}{msg}", .row.map(|r| format!("row {r}: ")).unwrap_or_default())]
    Format { row: Option<usize>, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid objective: {0}")]
    Invalid(String),
}

pub trait Objective: Send + Sync {
    fn evaluate(&self, h: &HyperConfig<f64>) -> Result<f64, ObjectiveError>;
}

impl<O: Objective + ?Sized> Objective for &O {
    fn evaluate(&self, h: &HyperConfig<f64>) -> Result<f64, ObjectiveError> {
        (**self).evaluate(h)
    }
}

impl<O: Objective + ?Sized> Objective for Box<O> {
    fn evaluate(&self, h: &HyperConfig<f64>) -> Result<f64, ObjectiveError> {
        (**self).evaluate(h)
    }
}

impl<O: Objective + ?Sized> Objective for Arc<O> {
    fn evaluate(&self, h: &HyperConfig<f64>) -> Result<f64, ObjectiveError> {
        (**self).evaluate(h)
    }
}

/// Adapts a closure.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: Fn(&HyperConfig<f64>) -> f64 + Send + Sync,
{
    fn evaluate(&self, h: &HyperConfig<f64>) -> Result<f64, ObjectiveError> {
        Ok((self.0)(h))
    }
}

impl Objective for PerformanceGrid {
    fn evaluate(&self, h: &HyperConfig<f64>) -> Result<f64, ObjectiveError> {
        grid_interpolate(self, h)
    }
}

impl Objective for SyntheticLandscape {
    fn evaluate(&self, h: &HyperConfig<f64>) -> Result<f64, ObjectiveError> {
        Ok(synthetic_eval(self, h))
    }
}

/// Parses `grid:<file>`, `synthetic:<preset-or-file>` or `cmd:<template>`.
pub fn objective_from_source(source: &str) -> Result<Arc<dyn Objective>, ObjectiveError> {
    let (kind, rest) = source
        .split_once(':')
        .ok_or_else(|| ObjectiveError::Invalid(format!("`{source}`: expected kind:value")))?;
    match kind.trim() {
        "grid" => Ok(Arc::new(grid_load(rest.trim())?)),
        "synthetic" => Ok(Arc::new(SyntheticLandscape::from_source(rest.trim())?)),
        "cmd" => Ok(Arc::new(ExternalObjective::new(ExternalCommandSpec::new(
            rest.trim().trim_matches('"'),
        )?))),
        other => Err(ObjectiveError::Invalid(format!(
            "unknown objective kind `{other}` (expected grid, synthetic or cmd)"
        ))),
    }
}
