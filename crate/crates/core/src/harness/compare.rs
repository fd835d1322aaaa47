use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{auc_at, mean_curve, n95, N95};
use super::HarnessError;
use crate::engine::{
    coordinate_descent, random_search, sample_log_uniform, BudgetPolicy, CdSettings, EngineError,
};
use crate::objectives::{objective_from_source, Objective};
use crate::reparam::{Dim, Preset, ReparamMatrix, SearchSpace, SpaceDoc};

/// A preset name or explicit rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Preset(Preset),
    Rows([[f64; 3]; 3]),
}

impl Default for MatrixSpec {
    fn default() -> Self {
        MatrixSpec::Preset(Preset::Balance)
    }
}

impl MatrixSpec {
    pub fn matrix(&self) -> Result<ReparamMatrix<f64>, EngineError> {
        match *self {
            MatrixSpec::Preset(p) => Ok(ReparamMatrix::preset(p)),
            MatrixSpec::Rows(rows) => Ok(ReparamMatrix::new(rows)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodKind {
    /// Coordinate descent started from a log-uniform random point.
    Cd {
        #[serde(default)]
        matrix: MatrixSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budgets: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        reversed: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope_threshold: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multiplier: Option<f64>,
    },
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: MethodKind,
}

impl MethodSpec {
    pub fn cd(name: &str, matrix: MatrixSpec) -> Self {
        Self {
            name: name.to_string(),
            kind: MethodKind::Cd {
                matrix,
                budgets: None,
                reversed: false,
                slope_threshold: None,
                multiplier: None,
            },
        }
    }

    pub fn random(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: MethodKind::Random,
        }
    }
}

fn default_space() -> SpaceDoc {
    SearchSpace::<f64>::standard()
        .with_pinned(Dim::BatchSize, 64.0)
        .expect("valid")
        .to_doc()
}

fn default_trajectories() -> usize {
    80
}

fn default_checkpoints() -> Vec<usize> {
    vec![10, 20]
}

/// Everything needed to rerun a comparison bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSpec {
    /// `grid:<file>`, `synthetic:<preset-or-file>` or `cmd:<template>`.
    pub objective: String,
    #[serde(default = "default_space")]
    pub space: SpaceDoc,
    pub budget: usize,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
    pub methods: Vec<MethodSpec>,
}

impl ComparisonSpec {
    pub fn new(objective: &str, budget: usize, methods: Vec<MethodSpec>) -> Self {
        Self {
            objective: objective.to_string(),
            space: default_space(),
            budget,
            trajectories: default_trajectories(),
            base_seed: 0,
            checkpoints: default_checkpoints(),
            methods,
        }
    }

    pub fn search_space(&self) -> Result<SearchSpace<f64>, HarnessError> {
        SearchSpace::from_doc(&self.space).map_err(|e| HarnessError::InvalidSpec(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trajectories == 0 {
            return Err(HarnessError::InvalidSpec(
                "trajectory count must be >= 1".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::InvalidSpec("no methods".into()));
        }
        let mut names = HashSet::new();
        for m in &self.methods {
            if !names.insert(m.name.as_str()) {
                return Err(HarnessError::InvalidSpec(format!(
                    "duplicate method `{}`",
                    m.name
                )));
            }
        }
        let max_k = self.checkpoints.iter().copied().max().unwrap_or(0);
        if self.budget == 0 || self.budget < max_k {
            return Err(HarnessError::InvalidSpec(format!(
                "budget {} must be >= 1 and cover every AUC checkpoint (max {max_k})",
                self.budget
            )));
        }
        if self.checkpoints.contains(&0) {
            return Err(HarnessError::InvalidSpec(
                "AUC checkpoints must be >= 1".into(),
            ));
        }
        self.search_space()?;
        Ok(())
    }
}

/// Aggregated results of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub name: String,
    pub mean_curve: Vec<f64>,
    /// `(k, AUC@k)` for every checkpoint.
    pub auc: Vec<(usize, f64)>,
    pub n95: N95,
    pub seeds: Vec<u64>,
    pub curves: Vec<Vec<f64>>,
}

impl MethodReport {
    pub fn auc_at(&self, k: usize) -> Option<f64> {
        self.auc.iter().find(|(c, _)| *c == k).map(|&(_, v)| v)
    }
}

/// Best-so-far curve of one trajectory, exactly `budget` long.
pub fn run_trajectory<O: Objective + ?Sized>(
    method: &MethodKind,
    obj: &O,
    space: &SearchSpace<f64>,
    budget: usize,
    seed: u64,
) -> Result<Vec<f64>, EngineError> {
    let history = match method {
        MethodKind::Cd {
            matrix,
            budgets,
            reversed,
            slope_threshold,
            multiplier,
        } => {
            let start = sample_log_uniform(space, &mut ChaCha8Rng::seed_from_u64(seed));
            let mut policy = BudgetPolicy::new(budgets.clone().unwrap_or_else(|| vec![3]), budget);
            if let Some(t) = slope_threshold {
                policy.slope_threshold = *t;
            }
            if let Some(m) = multiplier {
                policy.multiplier = *m;
            }
            let mut settings = CdSettings::new(start, *space, budget)
                .with_matrix(matrix.matrix()?)
                .with_policy(policy);
            if *reversed {
                settings = settings.reversed();
            }
            coordinate_descent(obj, &settings)?
        }
        MethodKind::Random => random_search(obj, space, budget, seed),
    };
    let mut curve = history.best_so_far();
    // a run that stalls early keeps its best value for the remaining budget
    if let Some(&last) = curve.last() {
        curve.resize(budget, last);
    }
    curve.truncate(budget);
    Ok(curve)
}

/// Loads the objective named in the spec and runs every method.
pub fn run_comparison(spec: &ComparisonSpec) -> Result<Vec<MethodReport>, HarnessError> {
    spec.validate()?;
    let obj = objective_from_source(&spec.objective)?;
    run_comparison_with(spec, obj.as_ref())
}

/// Runs every method of `spec` against `obj`. Trajectory `t` of each
/// method uses seed `base_seed + t`.
pub fn run_comparison_with<O: Objective + ?Sized>(
    spec: &ComparisonSpec,
    obj: &O,
) -> Result<Vec<MethodReport>, HarnessError> {
    spec.validate()?;
    let space = spec.search_space()?;
    let seeds: Vec<u64> = (0..spec.trajectories as u64)
        .map(|t| spec.base_seed.wrapping_add(t))
        .collect();
    let mut reports = Vec::with_capacity(spec.methods.len());
    for method in &spec.methods {
        let curves = seeds
            .par_iter()
            .map(|&seed| run_trajectory(&method.kind, obj, &space, spec.budget, seed))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| HarnessError::Method {
                method: method.name.clone(),
                source,
            })?;
        let mean = mean_curve(&curves);
        let auc = spec
            .checkpoints
            .iter()
            .map(|&k| auc_at(&mean, k).map(|v| (k, v)))
            .collect::<Result<Vec<_>, _>>()?;
        reports.push(MethodReport {
            name: method.name.clone(),
            mean_curve: mean,
            auc,
            n95: N95::Exceeds(spec.budget),
            seeds: seeds.clone(),
            curves,
        });
    }
    let means: Vec<&[f64]> = reports.iter().map(|r| r.mean_curve.as_slice()).collect();
    let n = n95(&means, spec.budget);
    for (r, v) in reports.iter_mut().zip(n) {
        r.n95 = v;
    }
    Ok(reports)
}
