use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ObjectiveError;
use crate::reparam::HyperConfig;

const HEADER: [&str; 4] = ["lambda_p", "lambda_e", "batch_size", "score"];
// slack on the hull test, in log units
const HULL_TOL: f64 = 1e-9;

/// Scores on a rectangular `Λp × Λe × b` lattice.
///
/// Interpolation is multilinear in log coordinates. An axis of length one is
/// treated as constant along that dimension, which is how 2D grids (fixed
/// batch size) are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceGrid {
    axes: [Vec<f64>; 3],
    scores: Vec<f64>,
    pub metric: String,
    pub dataset: String,
}

impl PerformanceGrid {
    /// `scores` is row-major: the batch-size index varies fastest.
    pub fn new(axes: [Vec<f64>; 3], scores: Vec<f64>) -> Result<Self, ObjectiveError> {
        for (d, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(invalid(format!("axis {} is empty", HEADER[d])));
            }
            if axis.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(invalid(format!(
                    "axis {} has non-positive values",
                    HEADER[d]
                )));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!(
                    "axis {} is not strictly increasing",
                    HEADER[d]
                )));
            }
        }
        let n: usize = axes.iter().map(Vec::len).product();
        if scores.len() != n {
            return Err(invalid(format!(
                "expected {n} scores, got {}",
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(invalid("scores must be finite".into()));
        }
        Ok(Self {
            axes,
            scores,
            metric: String::new(),
            dataset: String::new(),
        })
    }

    pub fn with_metadata(mut self, metric: &str, dataset: &str) -> Self {
        self.metric = metric.to_string();
        self.dataset = dataset.to_string();
        self
    }

    pub fn axes(&self) -> &[Vec<f64>; 3] {
        &self.axes
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.axes[0].len(), self.axes[1].len(), self.axes[2].len()]
    }

    fn flat(&self, i: usize, j: usize, k: usize) -> usize {
        let [_, n1, n2] = self.shape();
        (i * n1 + j) * n2 + k
    }

    pub fn score_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.scores[self.flat(i, j, k)]
    }

    pub fn nodes(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        let [n0, n1, n2] = self.shape();
        (0..n0).flat_map(move |i| {
            (0..n1).flat_map(move |j| {
                (0..n2).map(move |k| {
                    (
                        [self.axes[0][i], self.axes[1][j], self.axes[2][k]],
                        self.score_at(i, j, k),
                    )
                })
            })
        })
    }

    /// Bracketing node indices and the upper weight along one axis.
    fn locate(&self, dim: usize, x: f64) -> Option<(usize, usize, f64)> {
        let axis = &self.axes[dim];
        if axis.len() == 1 {
            return Some((0, 0, 0.0));
        }
        let lx = x.ln();
        let lo = axis[0].ln();
        let hi = axis[axis.len() - 1].ln();
        if !(lx >= lo - HULL_TOL && lx <= hi + HULL_TOL) {
            return None;
        }
        let lx = lx.clamp(lo, hi);
        let i = axis
            .partition_point(|&v| v.ln() <= lx)
            .saturating_sub(1)
            .min(axis.len() - 2);
        let (a, b) = (axis[i].ln(), axis[i + 1].ln());
        Some((i, i + 1, ((lx - a) / (b - a)).clamp(0.0, 1.0)))
    }
}

fn invalid(msg: String) -> ObjectiveError {
    ObjectiveError::Format { row: None, msg }
}

/// Multilinear interpolation in `log h`; never extrapolates.
pub fn grid_interpolate(g: &PerformanceGrid, h: &HyperConfig<f64>) -> Result<f64, ObjectiveError> {
    let v = h.to_array();
    let mut cell = [(0usize, 0usize, 0.0f64); 3];
    for d in 0..3 {
        cell[d] = g.locate(d, v[d]).ok_or(ObjectiveError::OutOfDomain(v))?;
    }
    let mut acc = 0.0;
    for corner in 0..8u8 {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        for d in 0..3 {
            let (i0, i1, t) = cell[d];
            if corner >> d & 1 == 1 {
                w *= t;
                idx[d] = i1;
            } else {
                w *= 1.0 - t;
                idx[d] = i0;
            }
        }
        if w != 0.0 {
            acc += w * g.score_at(idx[0], idx[1], idx[2]);
        }
    }
    Ok(acc)
}

pub fn grid_save(g: &PerformanceGrid, path: impl AsRef<Path>) -> Result<(), ObjectiveError> {
    let path = path.as_ref();
    std::fs::write(path, grid_to_csv(g)).map_err(|source| ObjectiveError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn grid_to_csv(g: &PerformanceGrid) -> String {
    let mut out = String::new();
    if !g.metric.is_empty() {
        let _ = writeln!(out, "# metric={}", g.metric);
    }
    if !g.dataset.is_empty() {
        let _ = writeln!(out, "# dataset={}", g.dataset);
    }
    out.push_str(&HEADER.join(","));
    out.push('\n');
    for (p, s) in g.nodes() {
        let _ = writeln!(out, "{},{},{},{}", p[0], p[1], p[2], s);
    }
    out
}

pub fn grid_load(path: impl AsRef<Path>) -> Result<PerformanceGrid, ObjectiveError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ObjectiveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    grid_from_csv(&text)
}

/// Parses the grid CSV; rows may come in any order but must cover every
/// lattice node exactly once.
pub fn grid_from_csv(text: &str) -> Result<PerformanceGrid, ObjectiveError> {
    let mut metric = String::new();
    let mut dataset = String::new();
    for line in text.lines().map(str::trim).filter(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').split_once('=') {
            match k.trim() {
                "metric" => metric = v.trim().to_string(),
                "dataset" => dataset = v.trim().to_string(),
                _ => {}
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| ObjectiveError::Format {
            row: Some(1),
            msg: e.to_string(),
        })?
        .clone();
    if header.iter().ne(HEADER) {
        return Err(ObjectiveError::Format {
            row: Some(1),
            msg: format!("expected header `{}`", HEADER.join(",")),
        });
    }

    let mut rows: Vec<(usize, [f64; 3], f64)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| ObjectiveError::Format {
            row: e.position().map(|p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields = rec
            .iter()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ObjectiveError::Format {
                row: Some(line),
                msg: e.to_string(),
            })?;
        let [a, b, c, s] = fields[..] else {
            return Err(ObjectiveError::Format {
                row: Some(line),
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        };
        if [a, b, c].iter().any(|&x| !(x.is_finite() && x > 0.0)) || !s.is_finite() {
            return Err(ObjectiveError::Format {
                row: Some(line),
                msg: "coordinates must be positive and scores finite".into(),
            });
        }
        rows.push((line, [a, b, c], s));
    }
    if rows.is_empty() {
        return Err(invalid("grid has no rows".into()));
    }

    let axes: [Vec<f64>; 3] = std::array::from_fn(|d| {
        let mut v: Vec<f64> = rows.iter().map(|r| r.1[d]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    });
    let n: usize = axes.iter().map(Vec::len).product();
    let mut scores: Vec<Option<f64>> = vec![None; n];
    let n1 = axes[1].len();
    let n2 = axes[2].len();
    for (line, p, s) in &rows {
        let idx: [usize; 3] = std::array::from_fn(|d| {
            axes[d]
                .binary_search_by(|x| x.total_cmp(&p[d]))
                .expect("value taken from the axis")
        });
        let slot = &mut scores[(idx[0] * n1 + idx[1]) * n2 + idx[2]];
        if slot.is_some() {
            return Err(ObjectiveError::Format {
                row: Some(*line),
                msg: format!("duplicate node {p:?}"),
            });
        }
        *slot = Some(*s);
    }
    let scores = scores
        .into_iter()
        .enumerate()
        .map(|(flat, s)| {
            s.ok_or_else(|| {
                let (i, j, k) = (flat / (n1 * n2), flat / n2 % n1, flat % n2);
                invalid(format!(
                    "grid is not rectangular: missing node ({}, {}, {})",
                    axes[0][i], axes[1][j], axes[2][k]
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PerformanceGrid::new(axes, scores)?.with_metadata(&metric, &dataset))
}
