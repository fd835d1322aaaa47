use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ObjectiveError;
use crate::reparam::{HyperConfig, Preset, ReparamMatrix};

const WAVES: usize = 4;

/// Smooth seeded sinusoidal field added on top of the quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Wave {
    freq: [f64; 3],
    phase: f64,
}

impl Perturbation {
    fn waves(&self) -> Vec<Wave> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..WAVES)
            .map(|_| {
                let mut dir = [0.0; 3];
                loop {
                    for x in dir.iter_mut() {
                        *x = rng.gen_range(-1.0..1.0);
                    }
                    let n = norm(&dir);
                    if n > 0.1 && n <= 1.0 {
                        dir.iter_mut().for_each(|x| *x /= n);
                        break;
                    }
                }
                let scale = rng.gen_range(0.5..1.5);
                Wave {
                    freq: dir.map(|x| x * scale),
                    phase: rng.gen_range(0.0..TAU),
                }
            })
            .collect()
    }
}

/// Concave quadratic in `v = B · log h` with optional ripple:
/// `s_max - Σ d_i (v_i - v*_i)² + perturbation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LandscapeDoc", into = "LandscapeDoc")]
pub struct SyntheticLandscape {
    optimum: HyperConfig<f64>,
    peak: f64,
    directions: ReparamMatrix<f64>,
    // rows as given, so serialization round-trips bit for bit
    raw_directions: [[f64; 3]; 3],
    curvatures: [f64; 3],
    perturbation: Option<Perturbation>,
    optimum_coords: [f64; 3],
    waves: Vec<Wave>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LandscapeDoc {
    optimum: [f64; 3],
    peak: f64,
    directions: [[f64; 3]; 3],
    curvatures: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perturbation: Option<Perturbation>,
}

impl TryFrom<LandscapeDoc> for SyntheticLandscape {
    type Error = ObjectiveError;

    fn try_from(d: LandscapeDoc) -> Result<Self, Self::Error> {
        let optimum = HyperConfig::from_array(d.optimum)
            .map_err(|e| ObjectiveError::Invalid(e.to_string()))?;
        let mut s = Self::new(optimum, d.peak, d.directions, d.curvatures)?;
        if let Some(p) = d.perturbation {
            s = s.with_perturbation(p);
        }
        Ok(s)
    }
}

impl From<SyntheticLandscape> for LandscapeDoc {
    fn from(s: SyntheticLandscape) -> Self {
        LandscapeDoc {
            optimum: s.optimum.to_array(),
            peak: s.peak,
            directions: s.raw_directions,
            curvatures: s.curvatures,
            perturbation: s.perturbation,
        }
    }
}

fn norm(v: &[f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl SyntheticLandscape {
    /// Rows of `directions` are normalized to unit length.
    pub fn new(
        optimum: HyperConfig<f64>,
        peak: f64,
        directions: [[f64; 3]; 3],
        curvatures: [f64; 3],
    ) -> Result<Self, ObjectiveError> {
        if !peak.is_finite() {
            return Err(ObjectiveError::Invalid("peak must be finite".into()));
        }
        if curvatures.iter().any(|&c| !(c.is_finite() && c >= 0.0)) {
            return Err(ObjectiveError::Invalid(
                "curvatures must be finite and nonnegative".into(),
            ));
        }
        let directions_in = directions;
        let mut rows = directions;
        for row in rows.iter_mut() {
            let n = norm(row);
            if n.is_nan() || n <= 0.0 {
                return Err(ObjectiveError::Invalid("zero direction row".into()));
            }
            row.iter_mut().for_each(|x| *x /= n);
        }
        let directions =
            ReparamMatrix::new(rows).map_err(|e| ObjectiveError::Invalid(e.to_string()))?;
        Ok(Self {
            optimum,
            peak,
            directions,
            raw_directions: directions_in,
            curvatures,
            perturbation: None,
            optimum_coords: directions.apply(optimum.log()),
            waves: Vec::new(),
        })
    }

    pub fn with_perturbation(mut self, p: Perturbation) -> Self {
        self.waves = if p.amplitude != 0.0 {
            p.waves()
        } else {
            Vec::new()
        };
        self.perturbation = Some(p);
        self
    }

    /// A narrow ridge: steep across the balance direction, shallow along joint
    /// scaling of `Λp, Λe`, shallower still in batch size.
    pub fn ridge() -> Self {
        Self::ridge_at(HyperConfig::new(8e-3, 2.0, 64.0).expect("valid optimum"))
    }

    pub fn ridge_at(optimum: HyperConfig<f64>) -> Self {
        Self::new(optimum, 0.85, Preset::Balance.rows(), [2.0, 0.1, 0.05])
            .expect("ridge preset is valid")
    }

    /// Named preset or a JSON file.
    pub fn from_source(source: &str) -> Result<Self, ObjectiveError> {
        match source {
            "ridge" => Ok(Self::ridge()),
            path => {
                let text = std::fs::read_to_string(path).map_err(|source| ObjectiveError::Io {
                    path: path.to_string(),
                    source,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| ObjectiveError::Invalid(format!("{path}: {e}")))
            }
        }
    }

    pub fn optimum(&self) -> HyperConfig<f64> {
        self.optimum
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn curvatures(&self) -> [f64; 3] {
        self.curvatures
    }

    pub fn directions(&self) -> &ReparamMatrix<f64> {
        &self.directions
    }

    pub fn perturbation(&self) -> Option<Perturbation> {
        self.perturbation
    }

    fn ripple(&self, lh: &[f64; 3]) -> f64 {
        let Some(p) = self.perturbation else {
            return 0.0;
        };
        if self.waves.is_empty() {
            return 0.0;
        }
        let sum: f64 = self
            .waves
            .iter()
            .map(|w| (w.freq[0] * lh[0] + w.freq[1] * lh[1] + w.freq[2] * lh[2] + w.phase).sin())
            .sum();
        p.amplitude * sum / self.waves.len() as f64
    }
}

pub fn synthetic_eval(s: &SyntheticLandscape, h: &HyperConfig<f64>) -> f64 {
    let lh = h.log();
    let v = s.directions.apply(lh);
    let deficit: f64 = (0..3)
        .map(|i| s.curvatures[i] * (v[i] - s.optimum_coords[i]).powi(2))
        .sum();
    s.peak - deficit + s.ripple(&lh)
}
