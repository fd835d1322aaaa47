use thiserror::Error;

use crate::engine::EngineError;
use crate::harness::HarnessError;
use crate::losses::LossError;
use crate::metrics::MetricError;
use crate::objectives::ObjectiveError;
use crate::reparam::ReparamError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Reparam(#[from] ReparamError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}
