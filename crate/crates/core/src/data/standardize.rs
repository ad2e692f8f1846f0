use serde::{Deserialize, Serialize};

use super::OrdinalDataset;
use crate::chain_crf::DesignRows;
use crate::error::{Result, StormError};
use crate::scalar::Scalar;

/// Per-dimension z-score transform fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, replaced by 1 for constant columns.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &OrdinalDataset) -> Result<Self> {
        if train.is_empty() {
            return Err(StormError::arg("cannot standardise an empty dataset"));
        }
        let n = train.len() as f64;
        let d = train.dim();
        let mut mean = vec![0.0; d];
        for row in train.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in train.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Standardised row followed by the constant bias feature.
    pub fn design_row<F: Scalar>(&self, x: &[f64]) -> Result<Vec<F>> {
        if x.len() != self.dim() {
            return Err(StormError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(StormError::NonFinite { row: 0, column: col, value: x[col] });
        }
        let mut out: Vec<F> =
            x.iter().zip(self.mean.iter().zip(&self.scale)).map(|(&v, (&m, &s))| F::lit((v - m) / s)).collect();
        out.push(F::one());
        Ok(out)
    }

    /// Design matrix (standardised features plus bias) in the model's scalar type.
    pub fn design<F: Scalar>(&self, data: &OrdinalDataset) -> Result<DesignRows<F>> {
        if data.dim() != self.dim() {
            return Err(StormError::DimensionMismatch { expected: self.dim(), got: data.dim() });
        }
        let mut flat = Vec::with_capacity(data.len() * (self.dim() + 1));
        for row in data.rows() {
            flat.extend(self.design_row::<F>(row)?);
        }
        DesignRows::new(data.len(), self.dim() + 1, flat)
    }

    /// Transformed dataset with the bias column appended.
    pub fn apply(&self, data: &OrdinalDataset) -> Result<OrdinalDataset> {
        let design = self.design::<f64>(data)?;
        let flat: Vec<f64> = design.iter_rows().flatten().copied().collect();
        data.with_features(self.dim() + 1, flat)
    }
}

/// Fits a [`Standardizer`] on `train` and returns it with the transformed data.
pub fn standardize(train: &OrdinalDataset) -> Result<(Standardizer, OrdinalDataset)> {
    let s = Standardizer::fit(train)?;
    let out = s.apply(train)?;
    Ok((s, out))
}
