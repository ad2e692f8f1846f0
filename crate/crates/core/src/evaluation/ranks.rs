use serde::{Deserialize, Serialize};

use super::wilcoxon::average_ranks_of;
use crate::error::{Result, StormError};

/// Datasets x models matrix of a lower-is-better metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub metric: String,
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    /// `scores[dataset][model]`.
    pub scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(
        metric: impl Into<String>,
        models: Vec<String>,
        datasets: Vec<String>,
        scores: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if scores.len() != datasets.len() {
            return Err(StormError::DimensionMismatch { expected: datasets.len(), got: scores.len() });
        }
        for row in &scores {
            if row.len() != models.len() {
                return Err(StormError::DimensionMismatch { expected: models.len(), got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(StormError::arg("score table entries must be finite"));
            }
        }
        Ok(Self { metric: metric.into(), models, datasets, scores })
    }
}

/// Ranks within one dataset: 1 for the lowest score, ties averaged.
pub fn rank_row(scores: &[f64]) -> Vec<f64> {
    average_ranks_of(scores)
}

/// Per-model rank averaged over datasets.
pub fn average_ranks(table: &ScoreTable) -> Result<Vec<f64>> {
    if table.datasets.is_empty() {
        return Err(StormError::arg("score table has no datasets"));
    }
    let m = table.models.len();
    let mut sums = vec![0.0; m];
    for row in &table.scores {
        for (s, r) in sums.iter_mut().zip(rank_row(row)) {
            *s += r;
        }
    }
    let n = table.datasets.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}
