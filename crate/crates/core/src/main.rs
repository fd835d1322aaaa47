use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use balance_hpo::engine::sample_log_uniform;
use balance_hpo::harness::{emit_report, run_comparison, summary_csv, ComparisonReport};
use balance_hpo::losses::{
    combine, global_average_coeffs_from_counts, infonce_terms, margin_terms, partition_pairs,
    separate_average_coeffs,
};
use balance_hpo::objectives::{grid_interpolate, grid_load, objective_from_source};
use balance_hpo::reparam::Dim;
use balance_hpo::{
    coordinate_descent, BalanceCoeffs, BudgetPolicy, CdSettings, ComparisonSpec, HyperConfig,
    InfoNceParams, LabeledBatch, MarginParams, MetricKind, QuerySetResult, ReparamMatrix,
    SearchSpace, TrialHistory,
};

#[derive(Parser)]
#[command(
    name = "balance-hpo",
    version,
    about = "Balanced contrastive losses and reparameterized hyperparameter search"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a contrastive loss on a labeled distance matrix.
    Loss(LossArgs),
    /// Mean retrieval metric over a set of ranked relevance lists.
    Metrics(MetricsArgs),
    /// Inspect or query a performance grid.
    Grid {
        #[command(subcommand)]
        cmd: GridCmd,
    },
    /// Run coordinate descent on one objective.
    Tune(TuneArgs),
    /// Compare search methods over many seeded trajectories.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LossKind {
    Margin,
    Infonce,
}

#[derive(Clone, Copy, ValueEnum)]
enum Aggregation {
    /// Weights proportional to the positive and negative pair counts.
    Global,
    /// Unit weights on both terms.
    Separate,
    /// Weights from --lambda-p / --lambda-e.
    Custom,
}

#[derive(clap::Args)]
struct LossArgs {
    /// JSON `{labels, distances}` or CSV rows `label,d_1,...,d_b`.
    #[arg(long)]
    batch: PathBuf,
    #[arg(long, value_enum, default_value = "margin")]
    loss: LossKind,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    /// Margin loss exponent, 1 or 2.
    #[arg(long, default_value_t = 2)]
    exponent: u32,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, value_enum, default_value = "separate")]
    agg: Aggregation,
    #[arg(long)]
    lambda_p: Option<f64>,
    #[arg(long)]
    lambda_e: Option<f64>,
}

#[derive(clap::Args)]
struct MetricsArgs {
    /// CSV with one query per row of 0/1 relevance flags in rank order.
    #[arg(long)]
    input: PathBuf,
    /// ap, ap-top-r or ap-at-r.
    #[arg(long, default_value = "ap-at-r")]
    metric: MetricKind,
    /// Also print the value of each query.
    #[arg(long)]
    per_query: bool,
}

#[derive(Subcommand)]
enum GridCmd {
    /// Validate a grid file and print its shape and ranges.
    Check { file: PathBuf },
    /// Interpolate the grid at one configuration.
    Eval {
        file: PathBuf,
        #[arg(long)]
        lambda_p: f64,
        #[arg(long)]
        lambda_e: f64,
        #[arg(long)]
        batch_size: f64,
    },
}

#[derive(clap::Args)]
struct TuneArgs {
    /// `grid:<file>`, `synthetic:<ridge|file>` or `cmd:<template>`.
    #[arg(long)]
    objective: String,
    /// Preset name (balance, identity, theory) or nine numbers, row-major.
    #[arg(long, default_value = "balance")]
    matrix: String,
    /// Initial per-line budgets; a single value applies to every line.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    total_budget: usize,
    /// Search-space file; defaults to the standard ranges with batch size pinned at 64.
    #[arg(long)]
    space: Option<PathBuf>,
    /// `lambda_p,lambda_e,batch_size`, `center`, or `random`.
    #[arg(long, default_value = "center")]
    start: String,
    /// Seed for `--start random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Visit the search directions in reverse order.
    #[arg(long)]
    reverse: bool,
    /// Disable budget growth on slow lines.
    #[arg(long)]
    fixed_budgets: bool,
    /// Trial CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CompareArgs {
    /// Comparison spec JSON, or a report.json from an earlier run.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "compare-out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Loss(a) => loss(a),
        Cmd::Metrics(a) => metrics(a),
        Cmd::Grid { cmd } => grid(cmd),
        Cmd::Tune(a) => tune(a),
        Cmd::Compare(a) => compare(a),
    }
}

fn loss(a: LossArgs) -> Result<()> {
    let batch = LabeledBatch::<f64>::load(&a.batch)?;
    let terms = match a.loss {
        LossKind::Margin => margin_terms(&batch, &MarginParams::new(a.margin, a.exponent)?)?,
        LossKind::Infonce => infonce_terms(&batch, &InfoNceParams::new(a.tau)?)?,
    };
    let coeffs = match a.agg {
        Aggregation::Separate => separate_average_coeffs(),
        Aggregation::Global => {
            let p = partition_pairs(batch.labels())?;
            global_average_coeffs_from_counts(p.positives.len(), p.negatives.len())?
        }
        Aggregation::Custom => match (a.lambda_p, a.lambda_e) {
            (Some(lp), Some(le)) => BalanceCoeffs::new(lp, le)?,
            _ => bail!("--agg custom needs --lambda-p and --lambda-e"),
        },
    };
    println!("pos_term={}", terms.pos_term);
    println!("ent_term={}", terms.ent_term);
    println!("lambda_p={}", coeffs.lambda_p);
    println!("lambda_e={}", coeffs.lambda_e);
    println!("loss={}", combine(&terms, &coeffs));
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let set = QuerySetResult::load(&a.input)?;
    if a.per_query {
        for (i, v) in set.per_query::<f64>(a.metric).iter().enumerate() {
            match v {
                Some(v) => println!("query {}: {v}", i + 1),
                None => println!("query {}: skipped (no relevant items)", i + 1),
            }
        }
    }
    let m = set.mean_metric::<f64>(a.metric)?;
    println!(
        "{} mean={} queries={} skipped={}",
        a.metric,
        m.mean,
        set.queries.len() - m.skipped,
        m.skipped
    );
    Ok(())
}

fn grid(cmd: GridCmd) -> Result<()> {
    match cmd {
        GridCmd::Check { file } => {
            let g = grid_load(&file)?;
            let [np, ne, nb] = g.shape();
            println!("shape={np}x{ne}x{nb}");
            for dim in Dim::ALL {
                let axis = &g.axes()[dim.index()];
                println!("{}=[{}, {}]", dim.key(), axis[0], axis[axis.len() - 1]);
            }
            let (lo, hi) = g
                .scores()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                    (lo.min(s), hi.max(s))
                });
            println!("score=[{lo}, {hi}]");
            if !g.metric.is_empty() {
                println!("metric={}", g.metric);
            }
            if !g.dataset.is_empty() {
                println!("dataset={}", g.dataset);
            }
        }
        GridCmd::Eval {
            file,
            lambda_p,
            lambda_e,
            batch_size,
        } => {
            let g = grid_load(&file)?;
            let h = HyperConfig::new(lambda_p, lambda_e, batch_size)?;
            println!("{}", grid_interpolate(&g, &h)?);
        }
    }
    Ok(())
}

fn default_space() -> SearchSpace<f64> {
    SearchSpace::standard()
        .with_pinned(Dim::BatchSize, 64.0)
        .expect("valid")
}

fn tune(a: TuneArgs) -> Result<()> {
    let obj = objective_from_source(&a.objective)?;
    let space = match &a.space {
        Some(p) => SearchSpace::load(p)?,
        None => default_space(),
    };
    let start = match a.start.trim() {
        "center" => space.log_center(),
        "random" => sample_log_uniform(&space, &mut ChaCha8Rng::seed_from_u64(a.seed)),
        s => s.parse::<HyperConfig<f64>>()?,
    };
    let policy = if a.fixed_budgets {
        BudgetPolicy::fixed(a.budgets.clone(), a.total_budget)
    } else {
        BudgetPolicy::new(a.budgets.clone(), a.total_budget)
    };
    let mut settings = CdSettings::new(start, space, a.total_budget)
        .with_matrix(ReparamMatrix::parse(&a.matrix)?)
        .with_policy(policy);
    if a.reverse {
        settings = settings.reversed();
    }
    let history = coordinate_descent(obj.as_ref(), &settings)?;
    let text = trials_csv(&history);
    match &a.output {
        Some(p) => write_file(p, &text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn trials_csv(history: &TrialHistory) -> String {
    let mut out = String::from("index,lambda_p,lambda_e,batch_size,score,cached\n");
    for t in &history.trials {
        let [p, e, b] = t.config.to_array();
        let _ = writeln!(out, "{},{p},{e},{b},{},{}", t.index, t.score, t.cached);
    }
    if let Some(best) = history.best() {
        let [p, e, b] = best.config.to_array();
        let _ = writeln!(
            out,
            "# best index={} lambda_p={p} lambda_e={e} batch_size={b} score={}",
            best.index, best.score
        );
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_spec(path: &Path) -> Result<ComparisonSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    // a report.json carries its spec, so a comparison can be rerun from it
    let value = match value {
        serde_json::Value::Object(mut m) if m.contains_key("spec") && m.contains_key("results") => {
            m.remove("spec").expect("checked")
        }
        v => v,
    };
    serde_json::from_value(value).with_context(|| format!("invalid spec in {}", path.display()))
}

fn compare(a: CompareArgs) -> Result<()> {
    let spec = load_spec(&a.spec)?;
    let results = run_comparison(&spec)?;
    let report = ComparisonReport { spec, results };
    emit_report(&report, &a.out)?;
    print!("{}", summary_csv(&report));
    Ok(())
}
