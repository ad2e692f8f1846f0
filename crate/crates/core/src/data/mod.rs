//! Datasets and everything that produces or reshapes them.

mod binning;
mod csv_io;
mod nystroem;
mod split;
mod standardize;
mod synthetic;

pub use binning::equal_frequency_binning;
pub use csv_io::{load_csv, load_features, save_csv, write_atomic};
pub use nystroem::{nystroem_features, NystroemMap};
pub use split::{
    derive_seed, random_split, random_split_indices, stratified_folds, unstratified_folds, FoldAssignment, SplitSpec,
};
pub use standardize::{standardize, Standardizer};
pub use synthetic::{make_synthetic, SyntheticKind, DEFAULT_NOISE};

use serde::{Deserialize, Serialize};

use crate::encoding::{encode_label, EncodedLabel};
use crate::error::{Result, StormError};

/// `N x D` feature matrix with ordinal labels in `1..=K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrdinalDataset {
    n: usize,
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    k: usize,
    provenance: String,
}

impl OrdinalDataset {
    /// Validates shape, label range and finiteness.
    pub fn from_flat(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        k: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if k < 2 {
            return Err(StormError::arg(format!("K must be at least 2, got {k}")));
        }
        let n = labels.len();
        if features.len() != n * dim {
            return Err(StormError::DimensionMismatch { expected: n * dim, got: features.len() });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(StormError::NonFinite { row: i / dim.max(1), column: i % dim.max(1), value: features[i] });
        }
        if let Some((row, &y)) = labels.iter().enumerate().find(|(_, &y)| y < 1 || y > k) {
            return Err(StormError::arg(format!("label {y} at row {row} outside 1..={k}")));
        }
        Ok(Self { n, dim, features, labels, k, provenance: provenance.into() })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, k: usize, provenance: impl Into<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(StormError::DimensionMismatch { expected: labels.len(), got: rows.len() });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(StormError::DimensionMismatch { expected: dim, got: r.len() });
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(dim, flat, labels, k, provenance)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self { n: idx.len(), dim: self.dim, features, labels, k: self.k, provenance: self.provenance.clone() }
    }

    /// Same labels with a new feature matrix (row count must match).
    pub fn with_features(&self, dim: usize, features: Vec<f64>) -> Result<Self> {
        Self::from_flat(dim, features, self.labels.clone(), self.k, self.provenance.clone())
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    /// Cumulative codes of every label.
    pub fn encoded_labels(&self) -> Vec<EncodedLabel> {
        self.labels.iter().map(|&y| encode_label(y, self.k).expect("labels validated on construction")).collect()
    }

    /// Instances per class, index `c - 1` for class `c`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_validates() {
        assert!(OrdinalDataset::from_rows(&[vec![1.0], vec![2.0]], vec![1, 2], 2, "t").is_ok());
        assert!(OrdinalDataset::from_rows(&[vec![1.0], vec![2.0]], vec![1, 3], 2, "t").is_err());
        assert!(OrdinalDataset::from_rows(&[vec![1.0], vec![f64::NAN]], vec![1, 2], 2, "t").is_err());
        assert!(OrdinalDataset::from_rows(&[vec![1.0], vec![1.0, 2.0]], vec![1, 2], 2, "t").is_err());
        assert!(OrdinalDataset::from_rows(&[vec![1.0]], vec![1], 1, "t").is_err());
    }

    #[test]
    fn subset_and_counts() {
        let d = OrdinalDataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![1, 3, 3], 3, "t").unwrap();
        assert_eq!(d.class_counts(), vec![1, 0, 2]);
        let s = d.subset(&[2, 0]);
        assert_eq!(s.labels(), &[3, 1]);
        assert_eq!(s.row(0), &[3.0]);
        assert_eq!(d.encoded_labels()[1].bits(), &[1, 1]);
    }
}
