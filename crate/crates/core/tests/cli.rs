use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_balance-hpo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn loss_eval() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch.json");
    fs::write(
        &batch,
        r#"{"labels": [0, 0, 1, 1],
            "distances": [[0, 0.2, 0.3, 0.3], [0.2, 0, 0.3, 0.3], [0.3, 0.3, 0, 0.4], [0.3, 0.3, 0.4, 0]]}"#,
    )
    .unwrap();
    // positives 0.2, 0.2, 0.4, 0.4 squared; every negative hinge is (0.5 - 0.3)^2
    let sep = stdout(&bin(&["loss", "--batch", p(&batch), "--margin", "0.5"]));
    assert!((value(&sep, "pos_term") - 0.1).abs() < 1e-12);
    assert!((value(&sep, "ent_term") - 0.04).abs() < 1e-12);
    assert!((value(&sep, "loss") - 0.14).abs() < 1e-12);

    let global = stdout(&bin(&["loss", "--batch", p(&batch), "--agg", "global"]));
    assert!((value(&global, "lambda_p") - 1.0 / 3.0).abs() < 1e-12);
    assert!((value(&global, "loss") - 0.06).abs() < 1e-12);

    let nce = stdout(&bin(&[
        "loss",
        "--batch",
        p(&batch),
        "--loss",
        "infonce",
        "--tau",
        "1",
    ]));
    let want = value(&nce, "pos_term") + value(&nce, "ent_term");
    assert!((value(&nce, "loss") - want).abs() < 1e-12);

    let custom = bin(&[
        "loss",
        "--batch",
        p(&batch),
        "--agg",
        "custom",
        "--lambda-p",
        "1",
    ]);
    assert!(!custom.status.success());
}

#[test]
fn metrics_mean() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("q.csv");
    fs::write(&csv, "1,0,1\n0,0,0\n1,1,0\n").unwrap();
    let out = stdout(&bin(&[
        "metrics",
        "--input",
        p(&csv),
        "--metric",
        "ap-at-r",
        "--per-query",
    ]));
    assert!(out.contains("query 2: skipped"), "{out}");
    assert!(
        out.trim_end()
            .ends_with("ap-at-r mean=0.75 queries=2 skipped=1"),
        "{out}"
    );
    let top = stdout(&bin(&[
        "metrics",
        "--input",
        p(&csv),
        "--metric",
        "ap-top-r",
    ]));
    assert!(top.starts_with("ap-top-r mean=1 "), "{top}");
}

#[test]
fn grid_commands() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    fs::write(
        &grid,
        "# metric=map@r\nlambda_p,lambda_e,batch_size,score\n\
         0.01,0.1,64,0.2\n0.01,10,64,0.4\n1,0.1,64,0.6\n1,10,64,0.8\n",
    )
    .unwrap();
    let check = stdout(&bin(&["grid", "check", p(&grid)]));
    assert!(check.contains("shape=2x2x1"), "{check}");
    assert!(check.contains("metric=map@r"), "{check}");

    let mid = stdout(&bin(&[
        "grid",
        "eval",
        p(&grid),
        "--lambda-p",
        "0.1",
        "--lambda-e",
        "1",
        "--batch-size",
        "64",
    ]));
    assert!((mid.trim().parse::<f64>().unwrap() - 0.5).abs() < 1e-12);

    let outside = bin(&[
        "grid",
        "eval",
        p(&grid),
        "--lambda-p",
        "5",
        "--lambda-e",
        "1",
        "--batch-size",
        "64",
    ]);
    assert!(!outside.status.success());
    assert!(String::from_utf8_lossy(&outside.stderr).contains("outside"));

    fs::write(
        &grid,
        "lambda_p,lambda_e,batch_size,score\n0.01,0.1,64,0.2\n1,10,64,0.8\n",
    )
    .unwrap();
    assert!(!bin(&["grid", "check", p(&grid)]).status.success());
}

#[test]
fn tune_writes_trial_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trials.csv");
    let out = bin(&[
        "tune",
        "--objective",
        "synthetic:ridge",
        "--budgets",
        "3,3",
        "--total-budget",
        "25",
        "--start",
        "random",
        "--seed",
        "4",
        "--output",
        p(&log),
    ]);
    stdout(&out);
    let text = fs::read_to_string(&log).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("index,lambda_p,lambda_e,batch_size,score,cached")
    );
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').collect())
        .collect();
    let fresh = rows.iter().filter(|r| r[5] == "false").count();
    assert_eq!(fresh, 25);
    assert!(rows.iter().all(|r| r[3] == "64"));
    let best = text.lines().last().unwrap();
    assert!(best.starts_with("# best index="), "{best}");

    // same arguments, same bytes
    let again = bin(&[
        "tune",
        "--objective",
        "synthetic:ridge",
        "--budgets",
        "3,3",
        "--total-budget",
        "25",
        "--start",
        "random",
        "--seed",
        "4",
    ]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn tune_with_external_command() {
    let out = bin(&[
        "tune",
        "--objective",
        "cmd:awk -v p={lambda_p} 'BEGIN { print -(log(p) + 4)^2 }'",
        "--total-budget",
        "12",
    ]);
    let text = stdout(&out);
    let scores: Vec<f64> = text
        .lines()
        .filter(|l| l.ends_with(",false"))
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(scores.len(), 12);
    assert!(scores.iter().all(|s| s.is_finite() && *s <= 0.0));
}

#[test]
fn compare_writes_reports_and_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"objective": "synthetic:ridge", "budget": 20, "trajectories": 4,
            "methods": [{"name": "cd", "kind": "cd"}, {"name": "rs", "kind": "random"}]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let summary = stdout(&bin(&["compare", "--spec", p(&spec), "--out", p(&out_dir)]));
    assert!(summary.starts_with("method,auc@10,auc@20,n95\n"));
    for f in ["summary.csv", "curve_cd.csv", "curve_rs.csv", "report.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }

    fs::write(
        &spec,
        r#"{"objective": "synthetic:ridge", "budget": 5, "methods": []}"#,
    )
    .unwrap();
    let bad = bin(&["compare", "--spec", p(&spec), "--out", p(&out_dir)]);
    assert!(!bad.status.success());
    let missing = bin(&["compare", "--spec", p(&dir.path().join("nope.json"))]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.json"));
}
