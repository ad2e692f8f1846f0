use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::OrdinalDataset;
use crate::error::{Result, StormError};

/// Eigenvalues below this are treated as numerically zero and dropped.
const EIGEN_FLOOR: f64 = 1e-12;

/// Nyström approximation of the RBF kernel `k(a, b) = exp(-γ ‖a - b‖²)`.
///
/// `z(x) = Λ^{-1/2} Vᵀ k(x)` where `k(x)` holds kernel values against the landmarks and
/// `V Λ Vᵀ` is the eigendecomposition of the landmark kernel matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NystroemMap {
    pub gamma: f64,
    pub landmarks: Vec<Vec<f64>>,
    /// `r x m` matrix `Λ^{-1/2} Vᵀ`, one row per retained component.
    pub projection: Vec<Vec<f64>>,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

impl NystroemMap {
    pub fn fit(train: &OrdinalDataset, n_landmarks: usize, gamma: f64, seed: u64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(StormError::arg(format!("gamma must be positive, got {gamma}")));
        }
        if n_landmarks == 0 || n_landmarks > train.len() {
            return Err(StormError::arg(format!("n_landmarks must be in 1..={}, got {n_landmarks}", train.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, train.len(), n_landmarks).into_vec();
        idx.sort_unstable();
        let landmarks: Vec<Vec<f64>> = idx.iter().map(|&i| train.row(i).to_vec()).collect();

        let m = landmarks.len();
        let kmm = DMatrix::from_fn(m, m, |i, j| rbf(&landmarks[i], &landmarks[j], gamma));
        let eig = SymmetricEigen::new(kmm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let projection = order
            .into_iter()
            .filter(|&c| eig.eigenvalues[c] > EIGEN_FLOOR)
            .map(|c| {
                let inv_sqrt = 1.0 / eig.eigenvalues[c].sqrt();
                eig.eigenvectors.column(c).iter().map(|v| v * inv_sqrt).collect()
            })
            .collect();
        Ok(Self { gamma, landmarks, projection })
    }

    pub fn input_dim(&self) -> usize {
        self.landmarks.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.projection.len()
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(StormError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let kx = DVector::from_iterator(self.landmarks.len(), self.landmarks.iter().map(|l| rbf(l, x, self.gamma)));
        Ok(self.projection.iter().map(|p| p.iter().zip(kx.iter()).map(|(a, b)| a * b).sum()).collect())
    }

    pub fn transform(&self, data: &OrdinalDataset) -> Result<OrdinalDataset> {
        let mut flat = Vec::with_capacity(data.len() * self.output_dim());
        for row in data.rows() {
            flat.extend(self.transform_row(row)?);
        }
        data.with_features(self.output_dim(), flat)
    }
}

/// Fits the map on `train` and returns it with the transformed training data.
pub fn nystroem_features(
    train: &OrdinalDataset,
    n_landmarks: usize,
    gamma: f64,
    seed: u64,
) -> Result<(NystroemMap, OrdinalDataset)> {
    let map = NystroemMap::fit(train, n_landmarks, gamma, seed)?;
    let out = map.transform(train)?;
    Ok((map, out))
}
