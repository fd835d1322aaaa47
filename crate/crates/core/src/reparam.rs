//! The three-dimensional hyperparameter space and its log-linear
//! reparameterization `r = A · log h`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Smallest admissible |det A|.
pub const MIN_ABS_DET: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReparamError {
    #[error("invalid hyperparameter configuration: {0}")]
    InvalidConfig(String),
    #[error("reparameterization matrix is singular (det = {det})")]
    SingularMatrix { det: f64 },
    #[error("unknown matrix preset `{0}` (expected balance, identity or theory)")]
    UnknownPreset(String),
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("cannot parse {what}: {msg}")]
    Parse { what: &'static str, msg: String },
}

/// Axis of the hyperparameter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dim {
    LambdaP,
    LambdaE,
    BatchSize,
}

impl Dim {
    pub const ALL: [Dim; 3] = [Dim::LambdaP, Dim::LambdaE, Dim::BatchSize];

    pub fn index(self) -> usize {
        match self {
            Dim::LambdaP => 0,
            Dim::LambdaE => 1,
            Dim::BatchSize => 2,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Dim::LambdaP => "lambda_p",
            Dim::LambdaE => "lambda_e",
            Dim::BatchSize => "batch_size",
        }
    }
}

/// A point `(Λp, Λe, b)` of the search space.
///
/// `lambda_p` and `lambda_e` are the effective step scales of the positive and
/// entropy terms, i.e. the learning rate multiplied by the respective loss
/// weight. Only these products are identifiable from training behaviour, so
/// the learning rate is never stored on its own. `batch_size` is a continuous
/// relaxation; objectives that need an integer round it themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig<T> {
    pub lambda_p: T,
    pub lambda_e: T,
    pub batch_size: T,
}

impl<T: Real> HyperConfig<T> {
    pub fn new(lambda_p: T, lambda_e: T, batch_size: T) -> Result<Self, ReparamError> {
        Self::from_array([lambda_p, lambda_e, batch_size])
    }

    pub fn from_array(v: [T; 3]) -> Result<Self, ReparamError> {
        for (dim, x) in Dim::ALL.iter().zip(v) {
            if !(x.is_finite() && x > T::zero()) {
                return Err(ReparamError::InvalidConfig(format!(
                    "{} must be finite and strictly positive, got {x}",
                    dim.key()
                )));
            }
        }
        Ok(Self {
            lambda_p: v[0],
            lambda_e: v[1],
            batch_size: v[2],
        })
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.lambda_p, self.lambda_e, self.batch_size]
    }

    pub fn get(&self, dim: Dim) -> T {
        self.to_array()[dim.index()]
    }

    /// Componentwise natural logarithm.
    pub fn log(&self) -> [T; 3] {
        self.to_array().map(Float::ln)
    }

    /// Inverse of [`HyperConfig::log`].
    pub fn from_log(v: [T; 3]) -> Result<Self, ReparamError> {
        Self::from_array(v.map(Float::exp))
    }

    /// Componentwise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self, ReparamError> {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array([a[0] * b[0], a[1] * b[1], a[2] * b[2]])
    }
}

impl<T: Real> FromStr for HyperConfig<T> {
    type Err = ReparamError;

    /// Parses `Λp,Λe,b`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = parse_numbers::<T>(s, "configuration")?;
        let v: [T; 3] = v.try_into().map_err(|v: Vec<T>| ReparamError::Parse {
            what: "configuration",
            msg: format!("expected 3 comma-separated numbers, got {}", v.len()),
        })?;
        Self::from_array(v)
    }
}

fn parse_numbers<T: Real>(s: &str, what: &'static str) -> Result<Vec<T>, ReparamError> {
    s.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map(T::lit)
                .map_err(|e| ReparamError::Parse {
                    what,
                    msg: format!("`{t}`: {e}"),
                })
        })
        .collect()
}

/// Closed log-box of admissible configurations.
///
/// A dimension with `lo == hi` is pinned and never varied by the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace<T> {
    bounds: [(T, T); 3],
}

impl<T: Real> SearchSpace<T> {
    pub fn new(bounds: [(T, T); 3]) -> Result<Self, ReparamError> {
        for (dim, (lo, hi)) in Dim::ALL.iter().zip(bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo > T::zero() && lo <= hi) {
                return Err(ReparamError::InvalidSpace(format!(
                    "{} range [{lo}, {hi}] must satisfy 0 < lo <= hi",
                    dim.key()
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// Λp, Λe ∈ [1e-6, 17] and b ∈ [16, 512].
    pub fn standard() -> Self {
        Self::new([
            (T::lit(1e-6), T::lit(17.0)),
            (T::lit(1e-6), T::lit(17.0)),
            (T::lit(16.0), T::lit(512.0)),
        ])
        .expect("default space is valid")
    }

    /// The two-dimensional variant with the batch size pinned.
    pub fn with_pinned(mut self, dim: Dim, value: T) -> Result<Self, ReparamError> {
        self.bounds[dim.index()] = (value, value);
        Self::new(self.bounds)
    }

    pub fn bounds(&self) -> [(T, T); 3] {
        self.bounds
    }

    pub fn lo(&self, dim: Dim) -> T {
        self.bounds[dim.index()].0
    }

    pub fn hi(&self, dim: Dim) -> T {
        self.bounds[dim.index()].1
    }

    pub fn is_active(&self, dim: Dim) -> bool {
        let (lo, hi) = self.bounds[dim.index()];
        lo < hi
    }

    pub fn active_mask(&self) -> [bool; 3] {
        Dim::ALL.map(|d| self.is_active(d))
    }

    pub fn contains(&self, h: &HyperConfig<T>) -> bool {
        h.to_array()
            .iter()
            .zip(self.bounds)
            .all(|(&x, (lo, hi))| lo <= x && x <= hi)
    }

    /// Projects `h` onto the box.
    pub fn clamp(&self, h: &HyperConfig<T>) -> HyperConfig<T> {
        let v = h.to_array();
        let c: [T; 3] = std::array::from_fn(|i| {
            let (lo, hi) = self.bounds[i];
            v[i].max(lo).min(hi)
        });
        HyperConfig {
            lambda_p: c[0],
            lambda_e: c[1],
            batch_size: c[2],
        }
    }

    /// Geometric center of the box.
    pub fn log_center(&self) -> HyperConfig<T> {
        let two = T::lit(2.0);
        let c = self
            .bounds
            .map(|(lo, hi)| ((lo.ln() + hi.ln()) / two).exp());
        self.clamp(&HyperConfig {
            lambda_p: c[0],
            lambda_e: c[1],
            batch_size: c[2],
        })
    }

    /// Parses either a JSON document or `key = lo, hi` lines.
    pub fn parse(text: &str) -> Result<Self, ReparamError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_key_value(text)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReparamError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ReparamError::Parse {
            what: "search space file",
            msg: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    fn parse_json(text: &str) -> Result<Self, ReparamError> {
        let doc: SpaceDoc = serde_json::from_str(text).map_err(|e| ReparamError::Parse {
            what: "search space JSON",
            msg: e.to_string(),
        })?;
        Self::from_doc(&doc)
    }

    pub fn from_doc(doc: &SpaceDoc) -> Result<Self, ReparamError> {
        let conv = |r: &RangeSpec| match *r {
            RangeSpec::Pinned(x) => (T::lit(x), T::lit(x)),
            RangeSpec::Interval([lo, hi]) => (T::lit(lo), T::lit(hi)),
        };
        Self::new([
            conv(&doc.lambda_p),
            conv(&doc.lambda_e),
            conv(&doc.batch_size),
        ])
    }

    pub fn to_doc(&self) -> SpaceDoc {
        let conv = |(lo, hi): (T, T)| {
            let (lo, hi) = (
                lo.to_f64().unwrap_or(f64::NAN),
                hi.to_f64().unwrap_or(f64::NAN),
            );
            if lo == hi {
                RangeSpec::Pinned(lo)
            } else {
                RangeSpec::Interval([lo, hi])
            }
        };
        SpaceDoc {
            lambda_p: conv(self.bounds[0]),
            lambda_e: conv(self.bounds[1]),
            batch_size: conv(self.bounds[2]),
        }
    }

    fn parse_key_value(text: &str) -> Result<Self, ReparamError> {
        let mut bounds: [Option<(T, T)>; 3] = [None; 3];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ReparamError::Parse {
                what: "search space",
                msg: format!("line {}: expected key=value", lineno + 1),
            })?;
            let dim = Dim::ALL
                .into_iter()
                .find(|d| d.key() == key.trim())
                .ok_or_else(|| ReparamError::Parse {
                    what: "search space",
                    msg: format!("line {}: unknown key `{}`", lineno + 1, key.trim()),
                })?;
            let nums = parse_numbers::<T>(value, "search space")?;
            bounds[dim.index()] = Some(match nums[..] {
                [x] => (x, x),
                [lo, hi] => (lo, hi),
                _ => {
                    return Err(ReparamError::Parse {
                        what: "search space",
                        msg: format!("line {}: expected one or two numbers", lineno + 1),
                    })
                }
            });
        }
        let mut out = [(T::zero(), T::zero()); 3];
        for dim in Dim::ALL {
            out[dim.index()] = bounds[dim.index()].ok_or_else(|| ReparamError::Parse {
                what: "search space",
                msg: format!("missing `{}`", dim.key()),
            })?;
        }
        Self::new(out)
    }
}

/// A dimension's range in a search-space document: `[lo, hi]` or a pinned value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangeSpec {
    Pinned(f64),
    Interval([f64; 2]),
}

/// JSON form of a [`SearchSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub lambda_p: RangeSpec,
    pub lambda_e: RangeSpec,
    pub batch_size: RangeSpec,
}

/// Named reparameterization matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Rows: balance `(-1, 1, 0)`, joint step scale `(1, 1, 0)`, batch size `(0, 0, 1)`.
    Balance,
    Identity,
    /// Rows `(1, 0, -1)`, `(0, 1, -2)`, `(1, -1, 0)`.
    Theory,
}

impl Preset {
    pub fn rows(self) -> [[f64; 3]; 3] {
        match self {
            Preset::Balance => [[-1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            Preset::Identity => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            Preset::Theory => [[1.0, 0.0, -1.0], [0.0, 1.0, -2.0], [1.0, -1.0, 0.0]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Balance => "balance",
            Preset::Identity => "identity",
            Preset::Theory => "theory",
        }
    }
}

impl FromStr for Preset {
    type Err = ReparamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "balance" => Ok(Preset::Balance),
            "identity" => Ok(Preset::Identity),
            "theory" => Ok(Preset::Theory),
            other => Err(ReparamError::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Invertible 3×3 matrix whose rows are coordinate directions in log-h space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReparamMatrix<T> {
    rows: [[T; 3]; 3],
    inverse: [[T; 3]; 3],
}

impl<T: Real> ReparamMatrix<T> {
    pub fn new(rows: [[T; 3]; 3]) -> Result<Self, ReparamError> {
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ReparamError::InvalidConfig(
                "matrix entries must be finite".into(),
            ));
        }
        let det = det3(&rows);
        if det.is_nan() || det.abs() <= T::lit(MIN_ABS_DET) {
            return Err(ReparamError::SingularMatrix {
                det: det.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            rows,
            inverse: inverse3(&rows, det),
        })
    }

    pub fn preset(preset: Preset) -> Self {
        Self::new(preset.rows().map(|r| r.map(T::lit))).expect("presets are invertible")
    }

    pub fn identity() -> Self {
        Self::preset(Preset::Identity)
    }

    pub fn rows(&self) -> &[[T; 3]; 3] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> [T; 3] {
        self.rows[i]
    }

    pub fn inverse(&self) -> &[[T; 3]; 3] {
        &self.inverse
    }

    /// Column `i` of `A⁻¹`: the log-h displacement that moves coordinate
    /// `r_i` by one unit and leaves the other coordinates fixed.
    pub fn coordinate_direction(&self, i: usize) -> [T; 3] {
        std::array::from_fn(|k| self.inverse[k][i])
    }

    pub fn determinant(&self) -> T {
        det3(&self.rows)
    }

    pub fn apply(&self, v: [T; 3]) -> [T; 3] {
        mat_vec(&self.rows, v)
    }

    pub fn apply_inverse(&self, v: [T; 3]) -> [T; 3] {
        mat_vec(&self.inverse, v)
    }

    /// A preset name or nine numbers in row-major order.
    pub fn parse(s: &str) -> Result<Self, ReparamError> {
        if let Ok(p) = s.parse::<Preset>() {
            return Ok(Self::preset(p));
        }
        let nums = parse_numbers::<T>(s, "matrix")
            .map_err(|_| ReparamError::UnknownPreset(s.trim().to_string()))?;
        if nums.len() != 9 {
            return Err(ReparamError::Parse {
                what: "matrix",
                msg: format!("expected a preset name or 9 numbers, got {}", nums.len()),
            });
        }
        Self::new(std::array::from_fn(|i| {
            std::array::from_fn(|j| nums[3 * i + j])
        }))
    }
}

impl<T: Real> Default for ReparamMatrix<T> {
    fn default() -> Self {
        Self::preset(Preset::Balance)
    }
}

/// Coordinates `r` in the reparameterized system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReparamPoint<T>(pub [T; 3]);

/// `r = A · log h` with the natural logarithm.
pub fn to_reparam<T: Real>(
    h: &HyperConfig<T>,
    a: &ReparamMatrix<T>,
) -> Result<ReparamPoint<T>, ReparamError> {
    let r = a.apply(h.log());
    if r.iter().any(|x| !x.is_finite()) {
        return Err(ReparamError::InvalidConfig(format!(
            "reparameterized point is not finite: {r:?}"
        )));
    }
    Ok(ReparamPoint(r))
}

/// `h = exp(A⁻¹ r)` componentwise.
pub fn from_reparam<T: Real>(
    r: &ReparamPoint<T>,
    a: &ReparamMatrix<T>,
) -> Result<HyperConfig<T>, ReparamError> {
    HyperConfig::from_log(a.apply_inverse(r.0))
}

pub fn preset_matrix<T: Real>(name: &str) -> Result<ReparamMatrix<T>, ReparamError> {
    Ok(ReparamMatrix::preset(name.parse()?))
}

fn mat_vec<T: Real>(m: &[[T; 3]; 3], v: [T; 3]) -> [T; 3] {
    m.map(|row| row[0] * v[0] + row[1] * v[1] + row[2] * v[2])
}

fn det3<T: Real>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

// adjugate / det
fn inverse3<T: Real>(m: &[[T; 3]; 3], det: T) -> [[T; 3]; 3] {
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    adj.map(|row| row.map(|x| x / det))
}
