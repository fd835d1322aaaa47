//! Balanced contrastive losses and reparameterized coordinate-descent
//! hyperparameter search.
//!
//! The numeric core ([`reparam`], [`losses`], [`metrics`]) is generic over the
//! scalar type; the search engine, objectives and comparison harness work in
//! `f64`. Concrete aliases for the common instantiations live at the crate
//! root.

pub mod engine;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod objectives;
pub mod reparam;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub use engine::{
    compute_bracket, coordinate_descent, line_search, random_search, BudgetPolicy, CdSettings,
    EvalCache, Trial, TrialHistory,
};
pub use harness::{auc_at, best_so_far, n95, ComparisonSpec, MethodReport, N95};
pub use losses::{BalanceCoeffs, InfoNceParams, LabeledBatch, MarginParams, TermPair};
pub use metrics::{MetricKind, QuerySetResult, RankedRelevance};
pub use objectives::{
    ExternalCommandSpec, Objective, ObjectiveError, PerformanceGrid, SyntheticLandscape,
};
pub use reparam::{Dim, HyperConfig, Preset, ReparamMatrix, ReparamPoint, SearchSpace};

pub type HyperConfigF64 = HyperConfig<f64>;
pub type HyperConfigF32 = HyperConfig<f32>;
pub type SearchSpaceF64 = SearchSpace<f64>;
pub type SearchSpaceF32 = SearchSpace<f32>;
pub type ReparamMatrixF64 = ReparamMatrix<f64>;
pub type ReparamMatrixF32 = ReparamMatrix<f32>;
pub type ReparamPointF64 = ReparamPoint<f64>;
pub type LabeledBatchF64 = LabeledBatch<f64>;
pub type LabeledBatchF32 = LabeledBatch<f32>;
pub type TermPairF64 = TermPair<f64>;
pub type TermPairF32 = TermPair<f32>;
pub type BalanceCoeffsF64 = BalanceCoeffs<f64>;
pub type BalanceCoeffsF32 = BalanceCoeffs<f32>;
