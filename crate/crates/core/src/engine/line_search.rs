use super::{probe, EngineError, EvalCache, Trial};
use crate::objectives::Objective;
use crate::reparam::{HyperConfig, SearchSpace};

/// 1/φ and 1/φ².
const INV_PHI: f64 = 0.618_033_988_749_894_9;
const INV_PHI2: f64 = 0.381_966_011_250_105_1;

/// Direction components smaller than this are treated as zero.
const DIR_EPS: f64 = 1e-12;

/// Region a line search may move in.
///
/// Lines are `h(γ) = h_l · exp(γ·a)` for a displacement `a` in log-h space.
pub trait LineDomain {
    /// Which of the three dimensions may vary.
    fn active_mask(&self) -> [bool; 3];

    fn contains(&self, h: &HyperConfig<f64>) -> bool;

    /// `[γ_min, γ_max]` with `γ_min ≤ 0 ≤ γ_max`.
    fn bracket(&self, anchor: &HyperConfig<f64>, dir: &[f64; 3])
        -> Result<(f64, f64), EngineError>;

    fn point(
        &self,
        anchor: &HyperConfig<f64>,
        dir: &[f64; 3],
        gamma: f64,
    ) -> Result<HyperConfig<f64>, EngineError>;
}

impl LineDomain for SearchSpace<f64> {
    fn active_mask(&self) -> [bool; 3] {
        SearchSpace::active_mask(self)
    }

    fn contains(&self, h: &HyperConfig<f64>) -> bool {
        SearchSpace::contains(self, h)
    }

    fn bracket(
        &self,
        anchor: &HyperConfig<f64>,
        dir: &[f64; 3],
    ) -> Result<(f64, f64), EngineError> {
        compute_bracket(anchor, dir, self)
    }

    fn point(
        &self,
        anchor: &HyperConfig<f64>,
        dir: &[f64; 3],
        gamma: f64,
    ) -> Result<HyperConfig<f64>, EngineError> {
        let l = anchor.log();
        let h = HyperConfig::from_log(std::array::from_fn(|i| l[i] + gamma * dir[i]))?;
        Ok(self.clamp(&h))
    }
}

/// Intersection of the line `h · exp(γ·a)` with the box `space`.
pub fn compute_bracket(
    h: &HyperConfig<f64>,
    a: &[f64; 3],
    space: &SearchSpace<f64>,
) -> Result<(f64, f64), EngineError> {
    if !space.contains(h) {
        return Err(EngineError::InvalidStart(format!(
            "{:?} lies outside the search space",
            h.to_array()
        )));
    }
    let active = space.active_mask();
    if (0..3).all(|i| !active[i] || a[i].abs() <= DIR_EPS) {
        return Err(EngineError::InvalidDirection);
    }
    let lh = h.log();
    let (mut g_min, mut g_max) = (f64::NEG_INFINITY, f64::INFINITY);
    for (i, (lo, hi)) in space.bounds().into_iter().enumerate() {
        if a[i].abs() <= DIR_EPS {
            continue;
        }
        let t1 = (lo.ln() - lh[i]) / a[i];
        let t2 = (hi.ln() - lh[i]) / a[i];
        g_min = g_min.max(t1.min(t2));
        g_max = g_max.min(t1.max(t2));
    }
    // rounding can push an on-boundary anchor a hair outside
    Ok((g_min.min(0.0), g_max.max(0.0)))
}

/// Golden-section bookkeeping on one line: the bracket ends and the two
/// interior probes at the 0.381966 / 0.618034 split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchState {
    pub anchor: HyperConfig<f64>,
    pub direction: [f64; 3],
    pub lo: f64,
    pub hi: f64,
    pub inner: Option<[(f64, f64); 2]>,
}

impl LineSearchState {
    pub fn new(anchor: HyperConfig<f64>, direction: [f64; 3], bracket: (f64, f64)) -> Self {
        Self {
            anchor,
            direction,
            lo: bracket.0,
            hi: bracket.1,
            inner: None,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `(γ_min, γ, γ_max)` with `γ` the better interior point.
    pub fn triple(&self) -> (f64, f64, f64) {
        let mid = match self.inner {
            Some([(x1, f1), (x2, f2)]) => {
                if f1 >= f2 {
                    x1
                } else {
                    x2
                }
            }
            None => 0.0,
        };
        (self.lo, mid, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub best: HyperConfig<f64>,
    pub best_score: f64,
    pub best_gamma: f64,
    pub bracket: (f64, f64),
    pub trials: Vec<Trial>,
    pub fresh: usize,
}

/// Bounded golden-section maximization of `obj` along `h_l · exp(γ·a)`.
///
/// Every fresh objective evaluation consumes one unit of `budget`; repeats
/// found in `cache` are free. The anchor's score is taken from the cache
/// (evaluated first if absent) and the result is never worse than it.
pub fn line_search<O, D>(
    obj: &O,
    anchor: &HyperConfig<f64>,
    direction: &[f64; 3],
    budget: usize,
    domain: &D,
    cache: &mut EvalCache,
) -> Result<LineSearchResult, EngineError>
where
    O: Objective + ?Sized,
    D: LineDomain + ?Sized,
{
    let bracket = domain.bracket(anchor, direction)?;
    let mut allowance = budget;
    let mut trials = Vec::new();

    let anchor_trial = probe(obj, anchor, cache, &mut allowance)
        .ok_or_else(|| EngineError::InvalidSettings("no budget left to score the anchor".into()))?;
    let mut best = (anchor_trial.score, 0.0, *anchor);
    if !anchor_trial.cached {
        trials.push(anchor_trial);
    }

    let mut state = LineSearchState::new(*anchor, *direction, bracket);
    let mut eval = |gamma: f64,
                    allowance: &mut usize,
                    trials: &mut Vec<Trial>,
                    best: &mut (f64, f64, HyperConfig<f64>)|
     -> Result<Option<f64>, EngineError> {
        let h = domain.point(anchor, direction, gamma)?;
        let Some(t) = probe(obj, &h, cache, allowance) else {
            return Ok(None);
        };
        trials.push(t);
        if t.score > best.0 {
            *best = (t.score, gamma, h);
        }
        Ok(Some(t.score))
    };

    // each step shrinks the bracket, so this only bounds runs of cache hits
    let mut steps_left = budget + 64;
    if state.width() > 0.0 {
        let x1 = state.lo + INV_PHI2 * state.width();
        let x2 = state.lo + INV_PHI * state.width();
        if let Some(f1) = eval(x1, &mut allowance, &mut trials, &mut best)? {
            if let Some(f2) = eval(x2, &mut allowance, &mut trials, &mut best)? {
                state.inner = Some([(x1, f1), (x2, f2)]);
            }
        }
        while let Some([(x1, f1), (x2, f2)]) = state.inner {
            if steps_left == 0 {
                break;
            }
            steps_left -= 1;
            let next = if f1 >= f2 {
                state.hi = x2;
                let x = state.lo + INV_PHI2 * state.width();
                eval(x, &mut allowance, &mut trials, &mut best)?.map(|f| [(x, f), (x1, f1)])
            } else {
                state.lo = x1;
                let x = state.lo + INV_PHI * state.width();
                eval(x, &mut allowance, &mut trials, &mut best)?.map(|f| [(x2, f2), (x, f)])
            };
            match next {
                Some(inner) => state.inner = Some(inner),
                None => break,
            }
        }
    }

    Ok(LineSearchResult {
        best: best.2,
        best_score: best.0,
        best_gamma: best.1,
        bracket,
        fresh: trials.iter().filter(|t| !t.cached).count(),
        trials,
    })
}
