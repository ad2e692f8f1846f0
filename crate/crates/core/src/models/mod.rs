//! Ordinal classifiers sharing one training configuration and prediction surface.

mod cv;
mod multinomial;
mod nested;
mod ordered_logit;
mod persist;
mod storm;

pub use cv::{select_l2, CvSelection, DEFAULT_L2_GRID};
pub use multinomial::MultinomialLogisticModel;
pub use nested::{nest_combine, NestedBinaryModel};
pub use ordered_logit::{ol_proba, OrderedLogitModel};
pub use persist::{AnyModel, ModelDocument, Predictor, ScalarKind, Weights, SCHEMA_VERSION};
pub use storm::{nll, nll_gradient, StormModel};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain_crf::InferenceMode;
use crate::data::OrdinalDataset;
use crate::error::{Result, StormError};
use crate::optim::{LbfgsConfig, Minimum, Termination};
use crate::scalar::Scalar;

/// How a StORM model turns inference into a label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionRule {
    /// Best path, repaired to the nearest valid code.
    #[default]
    Viterbi,
    /// Argmax of the label distribution under constrained transitions.
    Marginal,
}

impl FromStr for PredictionRule {
    type Err = StormError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "viterbi" => Ok(Self::Viterbi),
            "marginal" => Ok(Self::Marginal),
            _ => Err(StormError::arg(format!("unknown prediction rule '{s}' (viterbi, marginal)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Storm,
    OrdLog,
    Nest,
    LogReg,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Storm, ModelKind::OrdLog, ModelKind::Nest, ModelKind::LogReg];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Storm => "storm",
            ModelKind::OrdLog => "ordlog",
            ModelKind::Nest => "nest",
            ModelKind::LogReg => "logreg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = StormError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| StormError::arg(format!("unknown model '{s}' (storm, ordlog, nest, logreg)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2_strength: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub seed: u64,
    /// Transition handling used while training StORM (and for Viterbi decoding).
    pub mode: InferenceMode,
    pub prediction: PredictionRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_strength: 1.0,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            seed: 0,
            mode: InferenceMode::unconstrained(),
            prediction: PredictionRule::Viterbi,
        }
    }
}

impl TrainConfig {
    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2_strength = l2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l2_strength >= 0.0) || !self.l2_strength.is_finite() {
            return Err(StormError::arg(format!("l2 strength must be finite and >= 0, got {}", self.l2_strength)));
        }
        if self.max_iterations < 1 {
            return Err(StormError::arg("max_iterations must be at least 1"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(StormError::arg(format!("gradient tolerance must be > 0, got {}", self.gradient_tolerance)));
        }
        Ok(())
    }

    pub(crate) fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            ..LbfgsConfig::default()
        }
    }
}

/// What happened during a fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub warnings: Vec<String>,
}

impl FitDiagnostics {
    pub(crate) fn from_minimum<F: Scalar>(m: &Minimum<F>) -> Self {
        let mut warnings = Vec::new();
        match m.termination {
            Termination::GradientTolerance => {}
            Termination::MaxIterations => warnings.push(format!("iteration cap reached ({} iterations)", m.iterations)),
            Termination::LineSearchStalled => {
                warnings.push(format!("line search stalled with gradient max-norm {:e}", m.gradient_max_norm.as_f64()))
            }
        }
        Self { iterations: m.iterations, converged: m.converged(), objective: m.value.as_f64(), warnings }
    }

    pub(crate) fn merge(&mut self, other: FitDiagnostics) {
        self.iterations += other.iterations;
        self.converged &= other.converged;
        self.objective += other.objective;
        self.warnings.extend(other.warnings);
    }
}

/// Prediction surface shared by every model; inputs are raw (unstandardised) features.
pub trait OrdinalClassifier {
    fn k(&self) -> usize;

    /// Raw feature dimensionality expected by [`predict`](Self::predict).
    fn input_dim(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<usize>;

    /// `P(label = k)` for `k = 1..=K`.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn predict_dataset(&self, data: &OrdinalDataset) -> Result<Vec<usize>> {
        data.rows().map(|x| self.predict(x)).collect()
    }
}

/// Index (1-based label) of the largest entry; ties go to the smaller label.
pub(crate) fn argmax_label<F: Scalar>(p: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best + 1
}

pub(crate) fn check_training_data(data: &OrdinalDataset) -> Result<()> {
    if data.is_empty() {
        return Err(StormError::arg("training data is empty"));
    }
    Ok(())
}

/// Number of distinct labels present.
pub(crate) fn distinct_labels(data: &OrdinalDataset) -> usize {
    data.class_counts().iter().filter(|&&c| c > 0).count()
}
