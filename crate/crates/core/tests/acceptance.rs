//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any failed.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use balance_hpo::engine::sample_log_uniform;
use balance_hpo::harness::{run_comparison_with, MatrixSpec, MethodSpec};
use balance_hpo::losses::{
    combine, global_average_coeffs, infonce_terms, margin_terms, separate_average_coeffs,
};
use balance_hpo::metrics::{ap_at_r, ap_top_r, average_precision};
use balance_hpo::objectives::{
    grid_from_csv, grid_interpolate, grid_load, grid_save, FnObjective, Perturbation,
};
use balance_hpo::reparam::{from_reparam, to_reparam};
use balance_hpo::{
    coordinate_descent, BudgetPolicy, CdSettings, ComparisonSpec, HyperConfig, InfoNceParams,
    LabeledBatch, MarginParams, PerformanceGrid, Preset, RankedRelevance, ReparamMatrix,
    SearchSpace, SyntheticLandscape, N95,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Random 2-per-class batch with Euclidean distances between points in R^4.
fn two_per_class_batch(b: usize, rng: &mut ChaCha8Rng) -> LabeledBatch<f64> {
    let labels: Vec<i64> = (0..b as i64).map(|i| i / 2).collect();
    let pts: Vec<[f64; 4]> = (0..b)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-0.6..0.6)))
        .collect();
    let d = (0..b)
        .map(|i| {
            (0..b)
                .map(|j| {
                    (0..4)
                        .map(|k| (pts[i][k] - pts[j][k]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    LabeledBatch::new(labels, d).unwrap()
}

fn aggregation_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sizes = [4usize, 8, 16, 32, 64];
    let mut worst = 0.0f64;
    for n in 0..500 {
        let b = sizes[n % sizes.len()];
        let batch = two_per_class_batch(b, &mut rng);
        let m = rng.gen_range(0.2..1.2);
        let q = 1 + (n % 2) as u32;
        let terms = margin_terms(&batch, &MarginParams::new(m, q).unwrap()).unwrap();

        // brute force over every ordered pair
        let labels = batch.labels();
        let (mut all, mut pos, mut neg, mut np, mut nn) = (0.0, 0.0, 0.0, 0usize, 0usize);
        for i in 0..b {
            for j in 0..b {
                if i == j {
                    continue;
                }
                let d = batch.distance(i, j);
                let l = if labels[i] == labels[j] {
                    np += 1;
                    pos += d.powi(q as i32);
                    d.powi(q as i32)
                } else {
                    nn += 1;
                    neg += (m - d).max(0.0).powi(q as i32);
                    (m - d).max(0.0).powi(q as i32)
                };
                all += l;
            }
        }
        let global = all / (b * b - b) as f64;
        let got = combine(&terms, &global_average_coeffs(b).unwrap());
        worst = worst.max((got - global).abs() / global.abs().max(f64::MIN_POSITIVE));
        ensure(rel_close(got, global, 1e-12), || {
            format!("b={b}: global {got} vs brute force {global}")
        })?;
        let separate = pos / np as f64 + neg / nn as f64;
        let got = combine(&terms, &separate_average_coeffs());
        ensure(rel_close(got, separate, 1e-12), || {
            format!("b={b}: separate {got} vs {separate}")
        })?;
        ensure(got == terms.pos_term + terms.ent_term, || {
            "(1,1) is not the plain sum".into()
        })?;
    }
    Ok(format!("500 batches, worst relative error {worst:.1e}"))
}

fn infonce_closures() -> Outcome {
    let mut worst = 0.0f64;
    for b in (4..=128).step_by(2) {
        let labels: Vec<i64> = (0..b as i64).map(|i| i / 2).collect();
        for &tau in &[0.05, 0.1, 1.0] {
            for &c in &[0.0, 0.3, 1.7] {
                let d = (0..b)
                    .map(|i| (0..b).map(|j| if i == j { 0.0 } else { c }).collect())
                    .collect();
                let batch = LabeledBatch::new(labels.clone(), d).unwrap();
                let t = infonce_terms(&batch, &InfoNceParams::new(tau).unwrap()).unwrap();
                let want = ((b - 1) as f64).ln();
                let err = (t.pos_term + t.ent_term - want).abs();
                worst = worst.max(err);
                ensure(err <= 1e-10, || {
                    format!("b={b} tau={tau} c={c}: error {err:e}")
                })?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for b in [4usize, 16, 64] {
        let batch = two_per_class_batch(b, &mut rng);
        for &tau in &[0.05, 0.1, 1.0] {
            for &c in &[0.5, 3.0, 10.0] {
                let d = (0..b)
                    .map(|i| (0..b).map(|j| c * batch.distance(i, j)).collect())
                    .collect();
                let scaled = LabeledBatch::new(batch.labels().to_vec(), d).unwrap();
                let a = infonce_terms(&batch, &InfoNceParams::new(tau).unwrap()).unwrap();
                let s = infonce_terms(&scaled, &InfoNceParams::new(c * tau).unwrap()).unwrap();
                ensure(
                    (a.pos_term - s.pos_term).abs() <= 1e-10
                        && (a.ent_term - s.ent_term).abs() <= 1e-10,
                    || format!("scaling b={b} tau={tau} c={c}: {a:?} vs {s:?}"),
                )?;
            }
        }
    }
    Ok(format!("worst log(b-1) error {worst:.1e}"))
}

type Q = Ratio<i64>;

/// Brute force straight from the definitions, on a bitmask.
fn oracle(mask: u32, n: usize) -> (Q, Q, Q) {
    let rel = |k: usize| mask >> (k - 1) & 1 == 1;
    let hits = |k: usize| (1..=k).filter(|&i| rel(i)).count() as i64;
    let r = hits(n);
    let sum_to = |cut: usize| {
        (1..=cut)
            .filter(|&k| rel(k))
            .map(|k| Q::new(hits(k), k as i64))
            .fold(Q::from_integer(0), |a, x| a + x)
    };
    let ap = sum_to(n) / r;
    let top = hits(r as usize);
    let ap_top = if top == 0 {
        Q::from_integer(0)
    } else {
        sum_to(r as usize) / top
    };
    let ap_r = sum_to(r as usize) / r;
    (ap, ap_top, ap_r)
}

fn metric_oracle() -> Outcome {
    let mut lists = 0;
    for n in 1..=12usize {
        for mask in 1u32..(1 << n) {
            let bits: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
            let r = RankedRelevance::new(bits).unwrap();
            let got = (
                average_precision::<Q>(&r).unwrap(),
                ap_top_r::<Q>(&r).unwrap(),
                ap_at_r::<Q>(&r).unwrap(),
            );
            let want = oracle(mask, n);
            ensure(got == want, || {
                format!("mask {mask:0n$b}: {got:?} vs {want:?}")
            })?;
            ensure(got.2 <= got.1, || {
                format!("mask {mask:0n$b}: AP@R > AP-topR")
            })?;
            lists += 1;
        }
    }
    let r = RankedRelevance::new(vec![true, false, true]).unwrap();
    let (t, a) = (ap_top_r::<Q>(&r).unwrap(), ap_at_r::<Q>(&r).unwrap());
    ensure(t == Q::from_integer(1) && a == Q::new(1, 2), || {
        format!("[1,0,1] gave AP-topR {t}, AP@R {a}")
    })?;
    Ok(format!("{lists} lists exact, [1,0,1] -> (1, 1/2)"))
}

fn reparam_round_trip() -> Outcome {
    let space = SearchSpace::<f64>::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for preset in [Preset::Balance, Preset::Identity, Preset::Theory] {
        let a = ReparamMatrix::<f64>::preset(preset);
        for _ in 0..1000 {
            let h = sample_log_uniform(&space, &mut rng);
            let back = from_reparam(&to_reparam(&h, &a).unwrap(), &a).unwrap();
            for (x, y) in h.to_array().into_iter().zip(back.to_array()) {
                worst = worst.max((x - y).abs() / x);
                ensure(rel_close(x, y, 1e-10), || {
                    format!("{preset}: {h:?} -> {back:?}")
                })?;
            }
        }
    }
    let dets = [Preset::Balance, Preset::Theory, Preset::Identity]
        .map(|p| ReparamMatrix::<f64>::preset(p).determinant());
    ensure(dets == [-2.0, -1.0, 1.0], || {
        format!("determinants {dets:?}")
    })?;
    Ok(format!(
        "3000 round trips, worst {worst:.1e}; det = {dets:?}"
    ))
}

fn three_line_convergence() -> Outcome {
    let space = SearchSpace::<f64>::standard();
    let a = ReparamMatrix::<f64>::preset(Preset::Balance);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let target = sample_log_uniform(&space, &mut rng);
        let opt = to_reparam(&target, &a).unwrap().0;
        let w = [1.0, 0.4, 0.15];
        let obj = FnObjective(move |h: &HyperConfig<f64>| {
            let r = a.apply(h.log());
            -(0..3).map(|i| w[i] * (r[i] - opt[i]).powi(2)).sum::<f64>()
        });
        let total = 1 + 3 * 30;
        let settings = CdSettings::new(space.log_center(), space, total)
            .with_policy(BudgetPolicy::new(vec![30], total));
        let hist = coordinate_descent(&obj, &settings).map_err(|e| e.to_string())?;
        ensure(hist.lines.len() >= 3, || {
            format!("only {} lines", hist.lines.len())
        })?;
        let r = to_reparam(&hist.lines[2].incumbent, &a).unwrap().0;
        for i in 0..3 {
            let err = (r[i] - opt[i]).abs();
            worst = worst.max(err);
            ensure(err < 1e-3, || {
                format!("optimum {target:?}: r[{i}] off by {err:e}")
            })?;
        }
    }
    Ok(format!("20 optima, worst r error {worst:.1e}"))
}

fn ablation_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let optima_box = SearchSpace::new([(1e-4, 1.0), (1e-3, 10.0), (64.0, 64.0)]).unwrap();
    let mut spec = ComparisonSpec::new(
        "synthetic:ridge",
        50,
        vec![
            MethodSpec::cd("cd-balance", MatrixSpec::Preset(Preset::Balance)),
            MethodSpec::cd("cd-identity", MatrixSpec::Preset(Preset::Identity)),
            MethodSpec::random("random"),
        ],
    );
    spec.trajectories = 20;
    let mut auc = [0.0f64; 3];
    let mut lines = Vec::new();
    for l in 0..10u64 {
        let optimum = sample_log_uniform(&optima_box, &mut rng);
        let land = SyntheticLandscape::ridge_at(optimum).with_perturbation(Perturbation {
            amplitude: 0.01,
            seed: 100 + l,
        });
        spec.base_seed = 1000 * l;
        let reports = run_comparison_with(&spec, &land).map_err(|e| e.to_string())?;
        for (k, r) in reports.iter().enumerate() {
            auc[k] += r.auc_at(20).unwrap() / 10.0;
        }
        let (cd, rs) = (reports[0].n95, reports[2].n95);
        let ok = match (cd, rs) {
            (N95::Reached(a), N95::Reached(b)) => a < b,
            (N95::Reached(_), N95::Exceeds(_)) => true,
            _ => false,
        };
        ensure(ok, || {
            format!("landscape {l}: n-95 cd-balance {cd} vs random {rs}")
        })?;
        lines.push(format!("{cd}/{}/{rs}", reports[1].n95));
    }
    ensure(auc[0] >= auc[1], || {
        format!("AUC@20 balance {} < identity {}", auc[0], auc[1])
    })?;
    ensure(auc[0] > auc[2], || {
        format!("AUC@20 balance {} <= random {}", auc[0], auc[2])
    })?;
    Ok(format!(
        "mean AUC@20 balance {:.3}, identity {:.3}, random {:.3}; n-95 b/i/r {}",
        auc[0],
        auc[1],
        auc[2],
        lines.join(" ")
    ))
}

fn grid_objective() -> Outcome {
    let f =
        |lp: f64, le: f64, b: f64| 0.2 + 0.03 * lp.ln() - 0.02 * le.ln() + 0.01 * lp.ln() * b.ln();
    let axes = [
        vec![1e-3, 1e-2, 1e-1],
        vec![0.1, 1.0, 10.0, 100.0],
        vec![32.0, 128.0],
    ];
    let mut scores = Vec::new();
    for &p in &axes[0] {
        for &e in &axes[1] {
            for &b in &axes[2] {
                scores.push(f(p, e, b));
            }
        }
    }
    let g = PerformanceGrid::new(axes.clone(), scores)
        .unwrap()
        .with_metadata("map@r", "toy");
    for (node, s) in g.nodes() {
        let h = HyperConfig::from_array(node).unwrap();
        let v = grid_interpolate(&g, &h).map_err(|e| e.to_string())?;
        ensure(v == s, || format!("node {node:?}: {v} vs {s}"))?;
    }
    // f is multilinear in log coordinates, so interpolation reproduces it
    let mid = |a: f64, b: f64| (a * b).sqrt();
    for (p, e, b) in [
        (mid(1e-3, 1e-2), 1.0, 32.0),
        (1e-2, mid(1.0, 10.0), 128.0),
        (mid(1e-2, 1e-1), mid(10.0, 100.0), mid(32.0, 128.0)),
    ] {
        let v = grid_interpolate(&g, &HyperConfig::new(p, e, b).unwrap()).unwrap();
        ensure((v - f(p, e, b)).abs() < 1e-12, || {
            format!("midpoint ({p},{e},{b}): {v}")
        })?;
    }
    ensure(
        grid_interpolate(&g, &HyperConfig::new(1.0, 1.0, 64.0).unwrap()).is_err(),
        || "extrapolated outside the grid".into(),
    )?;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    grid_save(&g, &path).map_err(|e| e.to_string())?;
    let back = grid_load(&path).map_err(|e| e.to_string())?;
    ensure(back == g, || "save/load changed the grid".into())?;
    let ragged = "lambda_p,lambda_e,batch_size,score\n0.1,1,64,0.5\n0.1,10,64,0.6\n1,1,64,0.7\n";
    ensure(grid_from_csv(ragged).is_err(), || {
        "accepted a non-rectangular grid".into()
    })?;
    Ok("nodes exact, log midpoints linear, round trip identical, ragged grid rejected".into())
}

fn run_compare(spec: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_balance-hpo"))
        .args(["compare", "--spec"])
        .arg(spec)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!(
            "compare failed: {}",
            String::from_utf8_lossy(&status.stderr)
        )
    })
}

fn harness_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{
  "objective": "synthetic:ridge",
  "budget": 50,
  "trajectories": 12,
  "base_seed": 7,
  "methods": [
    {"name": "cd-balance", "kind": "cd", "matrix": "balance", "budgets": [3, 3]},
    {"name": "random", "kind": "random"}
  ]
}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_compare(&spec, &a)?;
    run_compare(&spec, &b)?;
    let mut files = 0;
    for name in [
        "summary.csv",
        "curve_cd-balance.csv",
        "curve_random.csv",
        "report.json",
    ] {
        let x = std::fs::read(a.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(x == y, || format!("{name} differs between runs"))?;
        files += 1;
    }
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    ensure(summary.starts_with("method,auc@10,auc@20,n95\n"), || {
        summary.clone()
    })?;
    let random = summary
        .lines()
        .find(|l| l.starts_with("random,"))
        .unwrap_or("");
    ensure(random.ends_with(",>50"), || {
        format!("random row `{random}`")
    })?;
    ensure(N95::Exceeds(50).to_string() == ">50", || {
        "n-95 rendering".into()
    })?;

    // a report can be fed back as the spec
    let c = dir.path().join("c");
    run_compare(&a.join("report.json"), &c)?;
    ensure(
        std::fs::read(a.join("summary.csv")).unwrap()
            == std::fs::read(c.join("summary.csv")).unwrap(),
        || "rerun from report.json differs".into(),
    )?;
    Ok(format!(
        "{files} files byte-identical; random row `{random}`"
    ))
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "1 aggregation identities",
            aggregation_identities,
            Some(Duration::from_secs(5)),
        ),
        (
            "2 InfoNCE closures",
            infonce_closures,
            Some(Duration::from_secs(5)),
        ),
        (
            "3 metric oracle",
            metric_oracle,
            Some(Duration::from_secs(30)),
        ),
        ("4 reparameterization", reparam_round_trip, None),
        (
            "5 three-line convergence",
            three_line_convergence,
            Some(Duration::from_secs(10)),
        ),
        (
            "6 ablation ordering",
            ablation_ordering,
            Some(Duration::from_secs(120)),
        ),
        (
            "7 grid objective",
            grid_objective,
            Some(Duration::from_secs(5)),
        ),
        ("8 harness determinism", harness_determinism, None),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let t = Instant::now();
        let mut outcome = check();
        let took = t.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if took > limit {
                outcome = Err(format!("took {took:.2?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS  {name} ({took:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({took:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 8 acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 8 acceptance criteria passed");
}
