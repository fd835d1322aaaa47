use serde::{Deserialize, Serialize};

use super::line_search::{line_search, LineDomain};
use super::{probe, EngineError, EvalCache, LineRecord, TrialHistory};
use crate::objectives::Objective;
use crate::reparam::{HyperConfig, ReparamMatrix, SearchSpace};

/// Per-direction budgets with the slope-based growth rule: after a line
/// search whose improvement per fresh evaluation falls below
/// `slope_threshold`, that direction's budget is multiplied by `multiplier`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPolicy {
    pub budgets: Vec<usize>,
    pub slope_threshold: f64,
    pub multiplier: f64,
    pub total: usize,
}

impl BudgetPolicy {
    pub fn new(budgets: Vec<usize>, total: usize) -> Self {
        Self {
            budgets,
            slope_threshold: 0.02,
            multiplier: 2.0,
            total,
        }
    }

    /// Fixed budgets: the growth rule never fires.
    pub fn fixed(budgets: Vec<usize>, total: usize) -> Self {
        Self {
            slope_threshold: f64::MIN_POSITIVE,
            ..Self::new(budgets, total)
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(EngineError::InvalidSettings(
                "per-direction budgets must be >= 1".into(),
            ));
        }
        if self.slope_threshold.is_nan() || self.slope_threshold <= 0.0 {
            return Err(EngineError::InvalidSettings(
                "slope threshold must be > 0".into(),
            ));
        }
        if self.multiplier.is_nan() || self.multiplier <= 1.0 {
            return Err(EngineError::InvalidSettings(
                "budget multiplier must be > 1".into(),
            ));
        }
        Ok(())
    }

    fn grow(&self, budget: usize) -> usize {
        ((budget as f64 * self.multiplier).ceil() as usize).max(budget + 1)
    }
}

#[derive(Debug, Clone)]
pub struct CdSettings<D = SearchSpace<f64>> {
    pub start: HyperConfig<f64>,
    pub matrix: ReparamMatrix<f64>,
    pub policy: BudgetPolicy,
    pub space: D,
    /// Order in which the coordinates of `r = A · log h` are searched.
    pub order: Vec<usize>,
}

impl CdSettings<SearchSpace<f64>> {
    /// Balance matrix, balance direction first, budget 3 for every direction.
    pub fn new(start: HyperConfig<f64>, space: SearchSpace<f64>, total: usize) -> Self {
        Self {
            start,
            matrix: ReparamMatrix::default(),
            policy: BudgetPolicy::new(vec![3], total),
            space,
            order: vec![0, 1, 2],
        }
    }
}

impl<D> CdSettings<D> {
    pub fn with_matrix(mut self, matrix: ReparamMatrix<f64>) -> Self {
        self.matrix = matrix;
        self
    }

    pub fn with_policy(mut self, policy: BudgetPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn reversed(mut self) -> Self {
        self.order.reverse();
        self
    }
}

impl<D: LineDomain> CdSettings<D> {
    /// Search directions in cycle order, as `(coordinate, log-h displacement)`.
    ///
    /// Coordinate `i` moves along column `i` of `A⁻¹`, which changes `r_i`
    /// and nothing else. Components on pinned dimensions are dropped and a
    /// direction with nothing left is skipped.
    pub fn directions(&self) -> Result<Vec<(usize, [f64; 3])>, EngineError> {
        let active = self.space.active_mask();
        let mut seen = [false; 3];
        let mut out = Vec::new();
        for &i in &self.order {
            if i >= 3 || std::mem::replace(&mut seen[i], true) {
                return Err(EngineError::InvalidSettings(format!(
                    "direction order {:?} is not a sequence of distinct rows",
                    self.order
                )));
            }
            let col = self.matrix.coordinate_direction(i);
            let dir: [f64; 3] = std::array::from_fn(|k| if active[k] { col[k] } else { 0.0 });
            if dir.iter().any(|x| x.abs() > 1e-12) {
                out.push((i, dir));
            }
        }
        if out.is_empty() {
            return Err(EngineError::InvalidSettings(
                "no searchable direction".into(),
            ));
        }
        Ok(out)
    }
}

/// Coordinate descent over the rows of the reparameterization matrix.
///
/// The start point is scored first and counts as one budgeted trial. Each
/// line search is anchored at the incumbent and receives its direction's
/// budget, capped by what remains of the total. The run ends once the total
/// budget is spent, or when a whole cycle of directions produced no fresh
/// evaluation.
pub fn coordinate_descent<O, D>(
    obj: &O,
    settings: &CdSettings<D>,
) -> Result<TrialHistory, EngineError>
where
    O: Objective + ?Sized,
    D: LineDomain,
{
    settings.policy.validate()?;
    if !settings.space.contains(&settings.start) {
        return Err(EngineError::InvalidStart(format!(
            "{:?} lies outside the search space",
            settings.start.to_array()
        )));
    }
    let dirs = settings.directions()?;
    let mut budgets = match settings.policy.budgets.len() {
        1 => vec![settings.policy.budgets[0]; dirs.len()],
        n if n == dirs.len() => settings.policy.budgets.clone(),
        n => {
            return Err(EngineError::InvalidSettings(format!(
                "{n} budgets given for {} search directions",
                dirs.len()
            )))
        }
    };

    let total = settings.policy.total;
    let mut cache = EvalCache::new();
    let mut history = TrialHistory::default();
    let mut one = 1;
    let start = probe(obj, &settings.start, &mut cache, &mut one).expect("empty cache");
    history.trials.push(start);
    let mut incumbent = (start.config, start.score);

    let mut slot = 0;
    let mut idle = 0;
    while cache.fresh() < total && idle < dirs.len() {
        let (row, dir) = dirs[slot];
        let budget = budgets[slot].min(total - cache.fresh());
        let before = incumbent.1;
        let res = line_search(obj, &incumbent.0, &dir, budget, &settings.space, &mut cache)?;
        history.trials.extend(res.trials.iter().copied());
        if res.best_score > incumbent.1 {
            incumbent = (res.best, res.best_score);
        }

        let slope = if res.fresh > 0 {
            (incumbent.1 - before) / res.fresh as f64
        } else {
            0.0
        };
        if slope < settings.policy.slope_threshold {
            budgets[slot] = settings.policy.grow(budgets[slot]);
        }
        history.lines.push(LineRecord {
            direction: row,
            budget,
            fresh: res.fresh,
            bracket: res.bracket,
            score_before: before,
            score_after: incumbent.1,
            incumbent: incumbent.0,
        });
        idle = if res.fresh == 0 { idle + 1 } else { 0 };
        slot = (slot + 1) % dirs.len();
    }
    Ok(history)
}
