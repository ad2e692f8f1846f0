use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use storm_core::benchmark::{run_benchmark, timings_csv, BenchmarkConfig, BenchmarkReport, DatasetSpec};
use storm_core::chain_crf::InferenceMode;
use storm_core::data::{
    derive_seed, load_csv, load_features, make_synthetic, save_csv, write_atomic, SyntheticKind, DEFAULT_NOISE,
};
use storm_core::evaluation::{macro_mae, macro_zero_one};
use storm_core::models::{
    ModelDocument, ModelKind, OrdinalClassifier, PredictionRule, Predictor, ScalarKind, TrainConfig,
};
use storm_core::scalar::Scalar;
use storm_core::StormError;

#[derive(Parser)]
#[command(name = "storm", version, about = "Ordinal regression with cumulative-code chain CRFs and baselines")]
struct Cli {
    /// Worker threads for CV, NEST and benchmark fits (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write train/test CSVs drawn from a synthetic generator.
    Synth(SynthArgs),
    /// Fit a model on a CSV and save it.
    Train(TrainArgs),
    /// Predict labels (and optionally probabilities) for a CSV.
    Predict(PredictArgs),
    /// Run the repeated-split comparison protocol and write a report.
    Benchmark(BenchmarkArgs),
    /// Evaluate a query of a 2-D model on a regular lattice.
    Grid(GridArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kind: SyntheticKind,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    #[arg(long, default_value_t = DEFAULT_NOISE)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives train.csv and test.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Unconstrained,
    Constrained,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args)]
struct FitFlags {
    /// Transition handling during StORM training.
    #[arg(long, value_enum, default_value_t = Mode::Unconstrained)]
    mode: Mode,
    /// StORM decoding rule: viterbi or marginal.
    #[arg(long, default_value = "viterbi")]
    predict: PredictionRule,
    /// Number of Nyström landmarks for an RBF feature map.
    #[arg(long, requires = "gamma")]
    nystroem: Option<usize>,
    /// RBF bandwidth for the Nyström map.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FitFlags {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_iterations: self.max_iter,
            gradient_tolerance: self.tolerance,
            seed: self.seed,
            mode: match self.mode {
                Mode::Unconstrained => InferenceMode::unconstrained(),
                Mode::Constrained => InferenceMode::constrained(),
            },
            prediction: self.predict,
            ..TrainConfig::default()
        }
    }

    fn nystroem(&self) -> Option<(usize, f64)> {
        self.nystroem.zip(self.gamma)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    model: ModelKind,
    /// Training CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Fixed ℓ2 strength; skips cross-validation.
    #[arg(long, conflicts_with = "l2_grid")]
    l2: Option<f64>,
    /// Comma-separated λ values searched by 5-fold CV.
    #[arg(long, value_delimiter = ',')]
    l2_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    #[command(flatten)]
    fit: FitFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model_file: PathBuf,
    /// CSV of feature rows; a label column, if present, is ignored.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Also write one probability column per label.
    #[arg(long)]
    proba: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// JSON benchmark configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic kinds to include (replaces the configured datasets).
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<SyntheticKind>>,
    /// Category counts for the synthetic datasets.
    #[arg(long = "k", value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    l2_grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    predict: Option<PredictionRule>,
    #[arg(long, requires = "gamma")]
    nystroem: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Report path (JSON). Scores go to `<out>.scores.csv`, timings to `<out>.timings.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Query {
    Label,
    Proba,
    Interval,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [-1.5, 1.5], allow_negative_numbers = true)]
    x_range: Vec<f64>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [-1.5, 1.5], allow_negative_numbers = true)]
    y_range: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    #[arg(long, value_enum, default_value_t = Query::Label)]
    query: Query,
    /// Label whose probability `--query proba` reports.
    #[arg(long)]
    class: Option<usize>,
    /// Bounds `a b` of `P(a <= y <= b)` for `--query interval`.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    interval: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .context("cannot start the worker pool")
            .and_then(|pool| pool.install(|| run(cli.command))),
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    StormError::InvalidArgument(msg.into()).into()
}

/// 2 for bad input, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<StormError>()) {
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Grid(a) => grid(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let train = make_synthetic(a.kind, a.n_train, a.k, a.noise, derive_seed(a.seed, 0, 0))?;
    let test = make_synthetic(a.kind, a.n_test, a.k, a.noise, derive_seed(a.seed, 0, 1))?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    save_csv(&train, a.out.join("train.csv"))?;
    save_csv(&test, a.out.join("test.csv"))?;
    println!(
        "{}-k{}: {} train / {} test rows (noise {}, seed {}) -> {}",
        a.kind,
        a.k,
        train.len(),
        test.len(),
        a.noise,
        a.seed,
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let data = load_csv(&a.data, &a.label_column, a.k)?;
    let config = a.fit.train_config();
    let grid = match (&a.l2, &a.l2_grid) {
        (Some(l2), _) => vec![*l2],
        (None, Some(g)) => g.clone(),
        (None, None) => storm_core::models::DEFAULT_L2_GRID.to_vec(),
    };
    match a.precision {
        Precision::F64 => train_as::<f64>(&a, &data, &config, &grid),
        Precision::F32 => train_as::<f32>(&a, &data, &config, &grid),
    }
}

fn train_as<F: Scalar>(
    a: &TrainArgs,
    data: &storm_core::data::OrdinalDataset,
    config: &TrainConfig,
    grid: &[f64],
) -> Result<()> {
    let predictor = Predictor::<F>::train(a.model, data, config, grid, a.fit.nystroem())?;
    predictor.save(&a.out)?;
    let pred = predictor.predict_dataset(data)?;
    let diag = predictor.model.diagnostics();
    let l2 = predictor.cv.as_ref().map_or(grid[0], |cv| cv.selected_l2);
    println!(
        "{} on {} rows (K={}, D={}): λ={l2}, {} iterations{}, objective {:.6}, training 0/1 {:.4}, MAE {:.4} -> {}",
        a.model,
        data.len(),
        data.k(),
        data.dim(),
        diag.iterations,
        if diag.converged { "" } else { " (not converged)" },
        diag.objective,
        macro_zero_one(data.labels(), &pred, data.k())?,
        macro_mae(data.labels(), &pred, data.k())?,
        a.out.display()
    );
    for w in &diag.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

enum Loaded {
    F64(Predictor<f64>),
    F32(Predictor<f32>),
}

fn load_model(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read model file {}", path.display()))?;
    let doc: ModelDocument = serde_json::from_str(&text)
        .map_err(StormError::from)
        .with_context(|| format!("{} is not a model file", path.display()))?;
    Ok(match doc.scalar {
        ScalarKind::F64 => Loaded::F64(Predictor::from_document(doc)?),
        ScalarKind::F32 => Loaded::F32(Predictor::from_document(doc)?),
    })
}

/// Reads feature rows and checks them against the model's input width.
fn read_rows(path: &Path, label_column: &str, input_dim: usize) -> Result<Vec<Vec<f64>>> {
    let (dim, flat) = load_features(path, label_column)?;
    if dim != input_dim {
        return Err(StormError::DimensionMismatch { expected: input_dim, got: dim })
            .with_context(|| format!("{} has {dim} feature columns, the model expects {input_dim}", path.display()));
    }
    Ok(flat.chunks(dim).map(<[f64]>::to_vec).collect())
}

fn predict(a: PredictArgs) -> Result<()> {
    match load_model(&a.model_file)? {
        Loaded::F64(p) => predict_with(&p, &a),
        Loaded::F32(p) => predict_with(&p, &a),
    }
}

fn predict_with<F: Scalar>(model: &Predictor<F>, a: &PredictArgs) -> Result<()> {
    let rows = read_rows(&a.data, &a.label_column, model.input_dim())?;
    let k = model.k();
    let mut out = String::from("label");
    if a.proba {
        for j in 1..=k {
            write!(out, ",p{j}")?;
        }
    }
    out.push('\n');
    for x in &rows {
        write!(out, "{}", model.predict(x)?)?;
        if a.proba {
            for p in model.predict_proba(x)? {
                write!(out, ",{p:?}")?;
            }
        }
        out.push('\n');
    }
    write_atomic(&a.out, out.as_bytes())?;
    println!("{} predictions -> {}", rows.len(), a.out.display());
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<BenchmarkConfig>(&text)
                .map_err(StormError::from)
                .with_context(|| format!("{} is not a benchmark configuration", path.display()))?
        }
        None => BenchmarkConfig::default(),
    };
    if a.kinds.is_some() || a.ks.is_some() {
        let kinds = a.kinds.clone().unwrap_or_else(|| SyntheticKind::ALL.to_vec());
        let ks = a.ks.clone().unwrap_or_else(|| vec![5, 10]);
        cfg.datasets =
            ks.iter().flat_map(|&k| kinds.iter().map(move |&kind| DatasetSpec::synthetic(kind, k))).collect();
    }
    if let Some(m) = a.models {
        cfg.models = m;
    }
    if let Some(r) = a.reps {
        cfg.repetitions = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(g) = a.l2_grid {
        cfg.l2_grid = g;
    }
    if let Some(m) = a.mode {
        cfg.train.mode = match m {
            Mode::Unconstrained => InferenceMode::unconstrained(),
            Mode::Constrained => InferenceMode::constrained(),
        };
    }
    if let Some(p) = a.predict {
        cfg.train.prediction = p;
    }
    if let Some(pair) = a.nystroem.zip(a.gamma) {
        cfg.nystroem = Some(pair);
    }
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }

    let output = run_benchmark(&cfg)?;
    write_atomic(&a.out, output.report.to_json()?.as_bytes())?;
    write_atomic(&a.out.with_extension("scores.csv"), output.report.scores_csv().as_bytes())?;
    write_atomic(&a.out.with_extension("timings.csv"), timings_csv(&output.timings).as_bytes())?;
    print!("{}", render_summary(&output.report));
    println!("report -> {}", a.out.display());
    Ok(())
}

fn render_summary(report: &BenchmarkReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {:<8} {:>5} {:>17} {:>17}", "dataset", "model", "fits", "macro 0/1", "macro MAE");
    for sm in &report.summaries {
        let _ = writeln!(
            s,
            "{:<14} {:<8} {:>5} {:>8.4} ± {:<6.4} {:>8.4} ± {:<6.4}",
            sm.dataset,
            sm.model.name(),
            sm.completed,
            sm.zero_one_mean,
            sm.zero_one_std,
            sm.mae_mean,
            sm.mae_std
        );
    }
    for (name, cmp) in [("0/1", &report.zero_one), ("MAE", &report.mae)] {
        let ranks: Vec<String> =
            cmp.table.models.iter().zip(&cmp.average_ranks).map(|(m, r)| format!("{m} {r:.3}")).collect();
        let _ = write!(s, "average ranks ({name}): {}", ranks.join(", "));
        if let Some(cd) = &cmp.critical_difference {
            let _ = write!(s, "; CD {:.3} at α={}", cd.critical_difference, cd.alpha);
        }
        s.push('\n');
        for t in cmp.wilcoxon.iter().filter(|t| t.result.significant) {
            let _ = writeln!(s, "  {} vs {}: p = {:.3e} over {} pairs", t.a, t.b, t.result.p_value, t.n_pairs);
        }
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

fn grid(a: GridArgs) -> Result<()> {
    match load_model(&a.model_file)? {
        Loaded::F64(p) => grid_with(&p, &a),
        Loaded::F32(p) => grid_with(&p, &a),
    }
}

fn grid_with<F: Scalar>(model: &Predictor<F>, a: &GridArgs) -> Result<()> {
    if model.input_dim() != 2 {
        return Err(invalid(format!("grid export needs a model over 2 features, this one has {}", model.input_dim())));
    }
    if a.resolution < 2 {
        return Err(invalid("resolution must be at least 2"));
    }
    let k = model.k();
    let interval = match a.query {
        Query::Label => None,
        Query::Proba => match a.class {
            Some(c) if (1..=k).contains(&c) => None,
            Some(c) => return Err(invalid(format!("class {c} outside 1..={k}"))),
            None => return Err(invalid("--query proba needs --class")),
        },
        Query::Interval => match a.interval.as_deref() {
            Some(&[lo, hi]) => Some((lo, hi)),
            _ => return Err(invalid("--query interval needs --interval A B")),
        },
    };
    let axis = |r: &[f64], i: usize| r[0] + (r[1] - r[0]) * i as f64 / (a.resolution - 1) as f64;
    let mut out = String::from("x,y,value\n");
    for i in 0..a.resolution {
        for j in 0..a.resolution {
            let x = [axis(&a.x_range, i), axis(&a.y_range, j)];
            let value = match (a.query, interval) {
                (Query::Interval, Some((lo, hi))) => model.interval_probability(&x, lo, hi)?,
                (Query::Proba, _) => model.predict_proba(&x)?[a.class.unwrap_or(1) - 1],
                _ => model.predict(&x)? as f64,
            };
            writeln!(out, "{:?},{:?},{value:?}", x[0], x[1])?;
        }
    }
    write_atomic(&a.out, out.as_bytes())?;
    println!("{0}x{0} grid -> {1}", a.resolution, a.out.display());
    Ok(())
}
