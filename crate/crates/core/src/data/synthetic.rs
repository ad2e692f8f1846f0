use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::OrdinalDataset;
use crate::error::{Result, StormError};

pub const DEFAULT_NOISE: f64 = 0.05;

/// Two-dimensional manifolds with ordinal labels banded along the manifold parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Linear,
    Sine,
    Circle,
    Spiral,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [Self::Linear, Self::Sine, Self::Circle, Self::Spiral];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Sine => "sine",
            Self::Circle => "circle",
            Self::Spiral => "spiral",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = StormError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "sine" => Ok(Self::Sine),
            "circle" => Ok(Self::Circle),
            "spiral" => Ok(Self::Spiral),
            other => Err(StormError::arg(format!("unknown synthetic kind '{other}'"))),
        }
    }
}

/// Samples `n` labelled points from one of the manifolds.
///
/// The manifold parameter `t` is drawn by jittered stratification (`t_i = (i + u_i) / n`,
/// then shuffled), so `t` is marginally uniform while class sizes stay within one of
/// `n / K`. Labels are `1 + floor(t K)`, clamped to `K`. Isotropic Gaussian noise with
/// standard deviation `noise` is added to both coordinates.
pub fn make_synthetic(kind: SyntheticKind, n: usize, k: usize, noise: f64, seed: u64) -> Result<OrdinalDataset> {
    if k < 2 {
        return Err(StormError::arg(format!("K must be at least 2, got {k}")));
    }
    if n < k {
        return Err(StormError::arg(format!("need n >= K, got n={n}, K={k}")));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(StormError::arg(format!("noise must be a finite non-negative std-dev, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts: Vec<f64> = (0..n).map(|i| (i as f64 + rng.random::<f64>()) / n as f64).collect();
    ts.shuffle(&mut rng);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");

    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for &t in &ts {
        let (x, y) = match kind {
            SyntheticKind::Linear => (2.0 * t - 1.0, 2.0 * t - 1.0),
            SyntheticKind::Sine => (2.0 * t - 1.0, 0.8 * (2.0 * PI * t).sin()),
            SyntheticKind::Circle => {
                let r = 0.2 + 0.8 * t;
                let angle = 2.0 * PI * rng.random::<f64>();
                (r * angle.cos(), r * angle.sin())
            }
            SyntheticKind::Spiral => {
                let r = 0.1 + 0.9 * t;
                let angle = 4.0 * PI * t;
                (r * angle.cos(), r * angle.sin())
            }
        };
        let (ex, ey) = (gauss.sample(&mut rng), gauss.sample(&mut rng));
        features.push(x + noise * ex);
        features.push(y + noise * ey);
        labels.push(((t * k as f64).floor() as usize + 1).min(k));
    }
    OrdinalDataset::from_flat(2, features, labels, k, format!("synthetic:{kind}:n={n}:k={k}:noise={noise}:seed={seed}"))
}
