use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::compare::{ComparisonSpec, MethodReport};
use super::HarnessError;

/// A finished comparison together with the spec that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub spec: ComparisonSpec,
    pub results: Vec<MethodReport>,
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// One row per method: AUC at every checkpoint, then n-95.
pub fn summary_csv(report: &ComparisonReport) -> String {
    let mut header = vec!["method".to_string()];
    header.extend(report.spec.checkpoints.iter().map(|k| format!("auc@{k}")));
    header.push("n95".into());
    let mut rows = vec![header];
    for r in &report.results {
        let mut row = vec![r.name.clone()];
        row.extend(
            report
                .spec
                .checkpoints
                .iter()
                .map(|&k| r.auc_at(k).map_or_else(String::new, |v| v.to_string())),
        );
        row.push(r.n95.to_string());
        rows.push(row);
    }
    csv_string(rows)
}

/// Mean best-so-far curve of one method, trials numbered from 1.
pub fn curve_csv(result: &MethodReport) -> String {
    let mut rows = vec![vec!["trial".to_string(), "mean_best_so_far".to_string()]];
    rows.extend(
        result
            .mean_curve
            .iter()
            .enumerate()
            .map(|(t, v)| vec![(t + 1).to_string(), v.to_string()]),
    );
    csv_string(rows)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, HarnessError> {
    fs::write(&path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// Writes `summary.csv`, `curve_<method>.csv` and `report.json` into `dir`,
/// creating it if needed. Returns the written paths.
pub fn emit_report(report: &ComparisonReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut out = vec![write(dir.join("summary.csv"), &summary_csv(report))?];
    for r in &report.results {
        let name = format!("curve_{}.csv", file_stem(&r.name));
        out.push(write(dir.join(name), &curve_csv(r))?);
    }
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    out.push(write(dir.join("report.json"), &json)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_comparison, MatrixSpec, MethodSpec};

    fn report() -> ComparisonReport {
        let spec = ComparisonSpec {
            trajectories: 3,
            ..ComparisonSpec::new(
                "synthetic:ridge",
                20,
                vec![
                    MethodSpec::cd("cd balance", MatrixSpec::default()),
                    MethodSpec::random("rs"),
                ],
            )
        };
        let results = run_comparison(&spec).unwrap();
        ComparisonReport { spec, results }
    }

    #[test]
    fn files_and_formats() {
        let r = report();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&r, dir.path()).unwrap();
        let names: Vec<_> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            [
                "summary.csv",
                "curve_cd_balance.csv",
                "curve_rs.csv",
                "report.json"
            ]
        );

        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("method,auc@10,auc@20,n95\n"));
        assert!(!summary.contains('\r'));
        assert_eq!(summary.lines().count(), 3);

        let curve = fs::read_to_string(dir.path().join("curve_rs.csv")).unwrap();
        assert_eq!(curve.lines().count(), 21);
        assert!(curve.lines().nth(1).unwrap().starts_with("1,"));

        let back: ComparisonReport =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn unwritable_dir_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_report(&report(), &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
