use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Trial, TrialHistory};
use crate::objectives::Objective;
use crate::reparam::{HyperConfig, SearchSpace};

/// Draws each active dimension log-uniformly; pinned dimensions keep their value.
pub fn sample_log_uniform<R: Rng + ?Sized>(
    space: &SearchSpace<f64>,
    rng: &mut R,
) -> HyperConfig<f64> {
    let v = space.bounds().map(|(lo, hi)| {
        if lo < hi {
            rng.gen_range(lo.ln()..=hi.ln()).exp()
        } else {
            lo
        }
    });
    space.clamp(&HyperConfig::from_array(v).expect("positive by construction"))
}

/// `budget` independent log-uniform draws, deterministic in `seed`.
pub fn random_search<O: Objective + ?Sized>(
    obj: &O,
    space: &SearchSpace<f64>,
    budget: usize,
    seed: u64,
) -> TrialHistory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = TrialHistory::default();
    for index in 1..=budget {
        let h = sample_log_uniform(space, &mut rng);
        let score = match obj.evaluate(&h) {
            Ok(s) if !s.is_nan() => s,
            _ => f64::NEG_INFINITY,
        };
        history.trials.push(Trial {
            index,
            config: h,
            score,
            cached: false,
        });
    }
    history
}
