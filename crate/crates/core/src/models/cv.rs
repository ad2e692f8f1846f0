use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OrdinalClassifier, TrainConfig};
use crate::data::{stratified_folds, OrdinalDataset};
use crate::error::{Result, StormError};
use crate::evaluation::macro_mae;

pub const DEFAULT_L2_GRID: [f64; 6] = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
const N_FOLDS: usize = 5;

/// Outcome of cross-validated λ selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub grid: Vec<f64>,
    /// Mean validation macro MAE for each grid value.
    pub mean_mae: Vec<f64>,
    pub selected_l2: f64,
    /// False when some class was too small to stratify and plain folds were used.
    pub stratified: bool,
    /// Fits that failed during CV, as `(λ, fold, message)`.
    pub failures: Vec<(f64, usize, String)>,
}

/// Stratified 5-fold selection of λ by mean macro MAE (ties to the larger λ), then a
/// refit on all of `data` with the winner.
pub fn select_l2<M, Fit>(
    data: &OrdinalDataset,
    grid: &[f64],
    config: &TrainConfig,
    fit: Fit,
) -> Result<(M, CvSelection)>
where
    M: OrdinalClassifier + Send,
    Fit: Fn(&OrdinalDataset, &TrainConfig) -> Result<M> + Sync,
{
    if grid.is_empty() {
        return Err(StormError::arg("λ grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(StormError::arg(format!("λ grid values must be finite and >= 0, got {bad}")));
    }
    config.validate()?;
    if grid.len() == 1 {
        let model = fit(data, &config.with_l2(grid[0]))?;
        let sel = CvSelection {
            grid: grid.to_vec(),
            mean_mae: Vec::new(),
            selected_l2: grid[0],
            stratified: true,
            failures: Vec::new(),
        };
        return Ok((model, sel));
    }
    if data.len() < N_FOLDS {
        return Err(StormError::arg(format!("cross-validation needs at least {N_FOLDS} rows, got {}", data.len())));
    }
    let folds = stratified_folds(data, N_FOLDS, config.seed)?;
    let splits: Vec<(OrdinalDataset, OrdinalDataset)> = (0..N_FOLDS)
        .map(|f| {
            let (tr, va) = folds.split(f);
            (data.subset(&tr), data.subset(&va))
        })
        .collect();

    let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..N_FOLDS).map(move |f| (g, f))).collect();
    let results: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(g, f)| {
            let (train, valid) = &splits[f];
            let model = fit(train, &config.with_l2(grid[g]))?;
            let pred = model.predict_dataset(valid)?;
            macro_mae(valid.labels(), &pred, data.k())
        })
        .collect();

    let mut failures = Vec::new();
    let mut mean_mae = vec![0.0; grid.len()];
    let mut counts = vec![0usize; grid.len()];
    for (&(g, f), r) in cells.iter().zip(results) {
        match r {
            Ok(v) => {
                mean_mae[g] += v;
                counts[g] += 1;
            }
            Err(e) => failures.push((grid[g], f, e.to_string())),
        }
    }
    for (m, &c) in mean_mae.iter_mut().zip(&counts) {
        *m = if c == 0 { f64::INFINITY } else { *m / c as f64 };
    }

    let mut best: Option<usize> = None;
    for g in 0..grid.len() {
        best = match best {
            None => Some(g),
            Some(b) if mean_mae[g] < mean_mae[b] || (mean_mae[g] == mean_mae[b] && grid[g] > grid[b]) => Some(g),
            keep => keep,
        };
    }
    let best = best.expect("grid is non-empty");
    if !mean_mae[best].is_finite() {
        return Err(StormError::arg("every cross-validation fit failed"));
    }
    let selected_l2 = grid[best];
    let model = fit(data, &config.with_l2(selected_l2))?;
    Ok((model, CvSelection { grid: grid.to_vec(), mean_mae, selected_l2, stratified: folds.stratified, failures }))
}
