//! The full comparison protocol: repeated splits, CV-selected λ per fit, macro metrics
//! on held-out data, then ranks, pairwise Wilcoxon tests and critical differences.
//!
//! Seeds: repetition `r` of dataset `i` draws its data from
//! `derive_seed(master, i, 2r)` (train) and `derive_seed(master, i, 2r + 1)` (test) for
//! synthetic sources, or from split `r` of `derive_seed(master, i, 0)` for CSV sources.
//! Fits in that cell use `derive_seed(master, DATASET_STREAMS + i, r)`. Any single cell
//! can be rerun without the others.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, load_csv, make_synthetic, random_split, OrdinalDataset, SplitSpec, SyntheticKind};
use crate::error::{Result, StormError};
use crate::evaluation::{
    average_ranks, cd_groups, critical_difference, macro_mae, macro_zero_one, wilcoxon_signed_rank, CdResult,
    ScoreTable, WilcoxonResult,
};
use crate::models::{ModelKind, OrdinalClassifier, Predictor, TrainConfig, DEFAULT_L2_GRID};

/// Offset separating fit-seed streams from data-seed streams.
const DATASET_STREAMS: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic { kind: SyntheticKind, n_train: usize, n_test: usize, noise: f64 },
    Csv { path: PathBuf, label_column: String, train_size: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub k: usize,
    #[serde(flatten)]
    pub source: DataSource,
}

impl DatasetSpec {
    /// Train 100 / test 1000, default noise.
    pub fn synthetic(kind: SyntheticKind, k: usize) -> Self {
        Self {
            name: format!("{kind}-k{k}"),
            k,
            source: DataSource::Synthetic { kind, n_train: 100, n_test: 1000, noise: crate::data::DEFAULT_NOISE },
        }
    }

    /// The 4 kinds x K ∈ {5, 10} synthetic suite.
    pub fn synthetic_suite() -> Vec<Self> {
        [5, 10]
            .into_iter()
            .flat_map(|k| SyntheticKind::ALL.into_iter().map(move |kind| Self::synthetic(kind, k)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub datasets: Vec<DatasetSpec>,
    pub models: Vec<ModelKind>,
    pub repetitions: usize,
    pub seed: u64,
    pub l2_grid: Vec<f64>,
    pub train: TrainConfig,
    /// `(landmarks, gamma)` for an RBF Nyström map in front of every model.
    pub nystroem: Option<(usize, f64)>,
    pub alpha: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            datasets: DatasetSpec::synthetic_suite(),
            models: ModelKind::ALL.to_vec(),
            repetitions: 20,
            seed: 0,
            l2_grid: DEFAULT_L2_GRID.to_vec(),
            train: TrainConfig::default(),
            nystroem: None,
            alpha: 0.01,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.models.is_empty() {
            return Err(StormError::arg("benchmark needs at least one dataset and one model"));
        }
        if self.repetitions == 0 {
            return Err(StormError::arg("benchmark needs at least one repetition"));
        }
        if self.l2_grid.is_empty() {
            return Err(StormError::arg("λ grid is empty"));
        }
        let mut seen = Vec::new();
        for d in &self.datasets {
            if seen.contains(&&d.name) {
                return Err(StormError::arg(format!("duplicate dataset name '{}'", d.name)));
            }
            seen.push(&d.name);
        }
        let mut models = self.models.clone();
        models.sort_by_key(|m| m.name());
        models.dedup();
        if models.len() != self.models.len() {
            return Err(StormError::arg("duplicate model in benchmark"));
        }
        self.train.validate()
    }
}

/// Outcome of one (dataset, model, repetition) fit. Scores are absent when the fit failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub model: ModelKind,
    pub repetition: usize,
    pub zero_one: Option<f64>,
    pub mae: Option<f64>,
    pub selected_l2: Option<f64>,
    pub cv_stratified: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub model: ModelKind,
    pub completed: usize,
    pub zero_one_mean: f64,
    pub zero_one_std: f64,
    pub mae_mean: f64,
    pub mae_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: ModelKind,
    pub b: ModelKind,
    pub n_pairs: usize,
    pub result: WilcoxonResult,
}

/// Rank table, critical difference and pairwise tests for one metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    /// Mean score per (dataset, model); datasets with a model missing entirely are left out.
    pub table: ScoreTable,
    pub average_ranks: Vec<f64>,
    pub critical_difference: Option<CdResult>,
    /// Upper triangle over `models`, paired over every (dataset, repetition) both completed.
    pub wilcoxon: Vec<PairwiseTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub cells: Vec<CellResult>,
    pub summaries: Vec<Summary>,
    pub zero_one: MetricComparison,
    pub mae: MetricComparison,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub dataset: String,
    pub model: ModelKind,
    pub repetition: usize,
    pub seconds: f64,
}

/// Report plus wall-clock timings, kept apart so the report is reproducible byte for byte.
#[derive(Clone, Debug)]
pub struct BenchmarkOutput {
    pub report: BenchmarkReport,
    pub timings: Vec<CellTiming>,
}

fn repetition_data(
    spec: &DatasetSpec,
    index: usize,
    cfg: &BenchmarkConfig,
) -> Result<Vec<(OrdinalDataset, OrdinalDataset)>> {
    let stream = index as u64;
    match &spec.source {
        DataSource::Synthetic { kind, n_train, n_test, noise } => (0..cfg.repetitions)
            .map(|r| {
                let r = r as u64;
                let train = make_synthetic(*kind, *n_train, spec.k, *noise, derive_seed(cfg.seed, stream, 2 * r))?;
                let test = make_synthetic(*kind, *n_test, spec.k, *noise, derive_seed(cfg.seed, stream, 2 * r + 1))?;
                Ok((train, test))
            })
            .collect(),
        DataSource::Csv { path, label_column, train_size } => {
            let data = load_csv(path, label_column, spec.k)?;
            let split = SplitSpec::new(derive_seed(cfg.seed, stream, 0), *train_size, cfg.repetitions)?;
            random_split(&data, &split)
        }
    }
}

fn run_cell(
    model: ModelKind,
    train: &OrdinalDataset,
    test: &OrdinalDataset,
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Result<(f64, f64, f64, bool, Vec<String>)> {
    let tc = TrainConfig { seed, ..cfg.train };
    let p = Predictor::<f64>::train(model, train, &tc, &cfg.l2_grid, cfg.nystroem)?;
    let pred = p.predict_dataset(test)?;
    let zo = macro_zero_one(test.labels(), &pred, test.k())?;
    let mae = macro_mae(test.labels(), &pred, test.k())?;
    let (l2, stratified, mut warnings) = match &p.cv {
        Some(cv) => (
            cv.selected_l2,
            cv.stratified,
            cv.failures.iter().map(|(l, f, m)| format!("CV fit λ={l} fold {f} failed: {m}")).collect(),
        ),
        None => (cfg.l2_grid[0], true, Vec::new()),
    };
    if !stratified {
        warnings.push("a class had fewer rows than CV folds; used unstratified folds".into());
    }
    warnings.extend(p.model.diagnostics().warnings.iter().cloned());
    Ok((zo, mae, l2, stratified, warnings))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn compare(
    metric: &str,
    cfg: &BenchmarkConfig,
    cells: &[CellResult],
    score: impl Fn(&CellResult) -> Option<f64>,
    warnings: &mut Vec<String>,
) -> Result<MetricComparison> {
    let models = &cfg.models;
    let lookup = |d: &str, m: ModelKind, r: usize| {
        cells.iter().find(|c| c.dataset == d && c.model == m && c.repetition == r).and_then(&score)
    };

    let mut datasets = Vec::new();
    let mut rows = Vec::new();
    for spec in &cfg.datasets {
        let row: Vec<Option<f64>> = models
            .iter()
            .map(|&m| {
                let v: Vec<f64> = (0..cfg.repetitions).filter_map(|r| lookup(&spec.name, m, r)).collect();
                (!v.is_empty()).then(|| mean_std(&v).0)
            })
            .collect();
        if row.iter().all(Option::is_some) {
            datasets.push(spec.name.clone());
            rows.push(row.into_iter().map(Option::unwrap).collect());
        } else {
            warnings
                .push(format!("{metric}: dataset '{}' left out of ranking (a model has no completed fit)", spec.name));
        }
    }
    let names = models.iter().map(|m| m.name().to_string()).collect();
    let table = ScoreTable::new(metric, names, datasets, rows)?;

    let (ranks, cd) = if table.datasets.is_empty() {
        (Vec::new(), None)
    } else {
        let ranks = average_ranks(&table)?;
        let cd = if (2..=10).contains(&models.len()) {
            let value = critical_difference(models.len(), table.datasets.len(), cfg.alpha)?;
            Some(cd_groups(&ranks, value, cfg.alpha)?)
        } else {
            None
        };
        (ranks, cd)
    };

    let mut wilcoxon = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for spec in &cfg.datasets {
                for r in 0..cfg.repetitions {
                    if let (Some(x), Some(y)) = (lookup(&spec.name, models[i], r), lookup(&spec.name, models[j], r)) {
                        a.push(x);
                        b.push(y);
                    }
                }
            }
            if a.len() < 5 {
                warnings.push(format!(
                    "{metric}: {} vs {} has only {} paired scores; no Wilcoxon test",
                    models[i],
                    models[j],
                    a.len()
                ));
                continue;
            }
            let result = wilcoxon_signed_rank(&a, &b, cfg.alpha)?;
            wilcoxon.push(PairwiseTest { a: models[i], b: models[j], n_pairs: a.len(), result });
        }
    }
    Ok(MetricComparison { table, average_ranks: ranks, critical_difference: cd, wilcoxon })
}

/// Runs every (dataset, repetition, model) cell on the current rayon pool.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let mut work = Vec::new();
    let mut data = Vec::new();
    for (i, spec) in cfg.datasets.iter().enumerate() {
        match repetition_data(spec, i, cfg) {
            Ok(reps) => {
                for r in 0..reps.len() {
                    for &m in &cfg.models {
                        work.push((i, data.len(), r, m));
                    }
                }
                data.push(reps);
            }
            Err(e) => {
                warnings.push(format!("dataset '{}' could not be prepared: {e}", spec.name));
                data.push(Vec::new());
            }
        }
    }

    let outcomes: Vec<(CellResult, CellTiming)> = work
        .par_iter()
        .map(|&(i, slot, r, m)| {
            let (train, test) = &data[slot][r];
            let start = Instant::now();
            let seed = derive_seed(cfg.seed, DATASET_STREAMS + i as u64, r as u64);
            let res = run_cell(m, train, test, cfg, seed);
            let seconds = start.elapsed().as_secs_f64();
            let name = cfg.datasets[i].name.clone();
            let cell = match res {
                Ok((zo, mae, l2, stratified, w)) => CellResult {
                    dataset: name.clone(),
                    model: m,
                    repetition: r,
                    zero_one: Some(zo),
                    mae: Some(mae),
                    selected_l2: Some(l2),
                    cv_stratified: Some(stratified),
                    warnings: w,
                },
                Err(e) => CellResult {
                    dataset: name.clone(),
                    model: m,
                    repetition: r,
                    zero_one: None,
                    mae: None,
                    selected_l2: None,
                    cv_stratified: None,
                    warnings: vec![format!("fit failed: {e}")],
                },
            };
            (cell, CellTiming { dataset: name, model: m, repetition: r, seconds })
        })
        .collect();
    let (cells, timings): (Vec<CellResult>, Vec<CellTiming>) = outcomes.into_iter().unzip();
    for c in &cells {
        if c.zero_one.is_none() {
            warnings.push(format!("{} / {} / rep {}: fit failed, cell missing", c.dataset, c.model, c.repetition));
        }
    }

    let mut summaries = Vec::new();
    for spec in &cfg.datasets {
        for &m in &cfg.models {
            let done: Vec<&CellResult> =
                cells.iter().filter(|c| c.dataset == spec.name && c.model == m && c.zero_one.is_some()).collect();
            let zo: Vec<f64> = done.iter().filter_map(|c| c.zero_one).collect();
            let mae: Vec<f64> = done.iter().filter_map(|c| c.mae).collect();
            if done.is_empty() {
                continue;
            }
            let (zm, zs) = mean_std(&zo);
            let (mm, ms) = mean_std(&mae);
            summaries.push(Summary {
                dataset: spec.name.clone(),
                model: m,
                completed: done.len(),
                zero_one_mean: zm,
                zero_one_std: zs,
                mae_mean: mm,
                mae_std: ms,
            });
        }
    }

    let zero_one = compare("macro_zero_one", cfg, &cells, |c| c.zero_one, &mut warnings)?;
    let mae = compare("macro_mae", cfg, &cells, |c| c.mae, &mut warnings)?;
    Ok(BenchmarkOutput {
        report: BenchmarkReport { config: cfg.clone(), cells, summaries, zero_one, mae, warnings },
        timings,
    })
}

impl BenchmarkReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Flat `dataset,model,repetition,zero_one,mae,selected_l2` dump; missing cells are empty.
    pub fn scores_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let mut out = String::from("dataset,model,repetition,zero_one,mae,selected_l2\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.dataset,
                c.model,
                c.repetition,
                opt(c.zero_one),
                opt(c.mae),
                opt(c.selected_l2)
            ));
        }
        out
    }

    pub fn summary(&self, dataset: &str, model: ModelKind) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.dataset == dataset && s.model == model)
    }
}

pub fn timings_csv(timings: &[CellTiming]) -> String {
    let mut out = String::from("dataset,model,repetition,seconds\n");
    for t in timings {
        out.push_str(&format!("{},{},{},{:.6}\n", t.dataset, t.model, t.repetition, t.seconds));
    }
    out
}
