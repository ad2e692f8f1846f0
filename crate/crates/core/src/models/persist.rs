use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cv::CvSelection;
use super::{
    FitDiagnostics, ModelKind, MultinomialLogisticModel, NestedBinaryModel, OrderedLogitModel, OrdinalClassifier,
    StormModel, TrainConfig,
};
use crate::chain_crf::ChainCrfParams;
use crate::data::{write_atomic, NystroemMap, OrdinalDataset, Standardizer};
use crate::error::{Result, StormError};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    F32,
    F64,
}

impl ScalarKind {
    pub fn of<F: Scalar>() -> Self {
        if std::mem::size_of::<F>() == 4 {
            ScalarKind::F32
        } else {
            ScalarKind::F64
        }
    }
}

/// Any of the four fitted models.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel<F: Scalar> {
    Storm(StormModel<F>),
    OrdLog(OrderedLogitModel<F>),
    Nest(NestedBinaryModel<F>),
    LogReg(MultinomialLogisticModel<F>),
}

impl<F: Scalar> AnyModel<F> {
    pub fn fit(kind: ModelKind, data: &OrdinalDataset, config: &TrainConfig) -> Result<Self> {
        Ok(match kind {
            ModelKind::Storm => AnyModel::Storm(StormModel::fit(data, config)?),
            ModelKind::OrdLog => AnyModel::OrdLog(OrderedLogitModel::fit(data, config)?),
            ModelKind::Nest => AnyModel::Nest(NestedBinaryModel::fit(data, config)?),
            ModelKind::LogReg => AnyModel::LogReg(MultinomialLogisticModel::fit(data, config)?),
        })
    }

    pub fn fit_cv(
        kind: ModelKind,
        data: &OrdinalDataset,
        grid: &[f64],
        config: &TrainConfig,
    ) -> Result<(Self, CvSelection)> {
        Ok(match kind {
            ModelKind::Storm => {
                let (m, s) = StormModel::fit_cv(data, grid, config)?;
                (AnyModel::Storm(m), s)
            }
            ModelKind::OrdLog => {
                let (m, s) = OrderedLogitModel::fit_cv(data, grid, config)?;
                (AnyModel::OrdLog(m), s)
            }
            ModelKind::Nest => {
                let (m, s) = NestedBinaryModel::fit_cv(data, grid, config)?;
                (AnyModel::Nest(m), s)
            }
            ModelKind::LogReg => {
                let (m, s) = MultinomialLogisticModel::fit_cv(data, grid, config)?;
                (AnyModel::LogReg(m), s)
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Storm(_) => ModelKind::Storm,
            AnyModel::OrdLog(_) => ModelKind::OrdLog,
            AnyModel::Nest(_) => ModelKind::Nest,
            AnyModel::LogReg(_) => ModelKind::LogReg,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        match self {
            AnyModel::Storm(m) => &m.config,
            AnyModel::OrdLog(m) => &m.config,
            AnyModel::Nest(m) => &m.config,
            AnyModel::LogReg(m) => &m.config,
        }
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        match self {
            AnyModel::Storm(m) => &m.diagnostics,
            AnyModel::OrdLog(m) => &m.diagnostics,
            AnyModel::Nest(m) => &m.diagnostics,
            AnyModel::LogReg(m) => &m.diagnostics,
        }
    }

    fn standardizer(&self) -> &Standardizer {
        match self {
            AnyModel::Storm(m) => &m.standardizer,
            AnyModel::OrdLog(m) => &m.standardizer,
            AnyModel::Nest(m) => &m.standardizer,
            AnyModel::LogReg(m) => &m.standardizer,
        }
    }

    fn inner(&self) -> &dyn OrdinalClassifier {
        match self {
            AnyModel::Storm(m) => m,
            AnyModel::OrdLog(m) => m,
            AnyModel::Nest(m) => m,
            AnyModel::LogReg(m) => m,
        }
    }
}

impl<F: Scalar> OrdinalClassifier for AnyModel<F> {
    fn k(&self) -> usize {
        self.inner().k()
    }

    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        self.inner().predict(x)
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().predict_proba(x)
    }
}

/// Optional Nyström feature map in front of a fitted model.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor<F: Scalar> {
    pub feature_map: Option<NystroemMap>,
    pub model: AnyModel<F>,
    pub cv: Option<CvSelection>,
}

/// Weight arrays as written to disk, always in `f64` (exact for both scalar types).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    Storm {
        /// `[K-1][2][D]`.
        node_weights: Vec<Vec<Vec<f64>>>,
        /// `[K-2][2][2][D]`, row = state of the earlier node.
        edge_weights: Vec<Vec<Vec<Vec<f64>>>>,
    },
    OrdLog {
        w: Vec<f64>,
        threshold_increments: Vec<f64>,
    },
    Nest {
        classifiers: Vec<Vec<f64>>,
        degenerate: Vec<usize>,
    },
    LogReg {
        class_weights: Vec<Vec<f64>>,
    },
}

/// On-disk layout of a trained predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub model_kind: ModelKind,
    pub scalar: ScalarKind,
    pub k: usize,
    /// Raw input dimensionality, before any feature map.
    pub d_raw: usize,
    pub feature_map: Option<NystroemMap>,
    pub standardization: Standardizer,
    pub config: TrainConfig,
    pub weights: Weights,
    pub diagnostics: FitDiagnostics,
    pub cv: Option<CvSelection>,
}

fn to_f64<F: Scalar>(v: &[F]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64<F: Scalar>(v: &[f64]) -> Vec<F> {
    v.iter().map(|&x| F::lit(x)).collect()
}

impl<F: Scalar> Predictor<F> {
    pub fn new(feature_map: Option<NystroemMap>, model: AnyModel<F>) -> Self {
        Self { feature_map, model, cv: None }
    }

    /// Fits an optional Nyström map (`(landmarks, gamma)`) and then the model, with CV
    /// over `grid` when it holds more than one value.
    pub fn train(
        kind: ModelKind,
        data: &OrdinalDataset,
        config: &TrainConfig,
        grid: &[f64],
        nystroem: Option<(usize, f64)>,
    ) -> Result<Self> {
        let (feature_map, features) = match nystroem {
            Some((m, gamma)) => {
                let map = NystroemMap::fit(data, m.min(data.len()), gamma, config.seed)?;
                let z = map.transform(data)?;
                (Some(map), z)
            }
            None => (None, data.clone()),
        };
        let (model, cv) = match grid {
            [] => return Err(StormError::arg("λ grid is empty")),
            [l2] => (AnyModel::fit(kind, &features, &config.with_l2(*l2))?, None),
            _ => {
                let (m, s) = AnyModel::fit_cv(kind, &features, grid, config)?;
                (m, Some(s))
            }
        };
        Ok(Self { feature_map, model, cv })
    }

    fn mapped(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.feature_map {
            Some(map) => map.transform_row(x),
            None => Ok(x.to_vec()),
        }
    }

    /// `P(a <= label <= b)`; StORM answers through chain inference, the others by summing
    /// their label distribution.
    pub fn interval_probability(&self, x: &[f64], a: usize, b: usize) -> Result<f64> {
        let k = self.k();
        if a < 1 || b > k || a > b {
            return Err(StormError::arg(format!("interval [{a}, {b}] is not within 1..={k}")));
        }
        let z = self.mapped(x)?;
        match &self.model {
            AnyModel::Storm(m) => m.interval_query(&z, a, b),
            other => Ok(other.predict_proba(&z)?[a - 1..b].iter().sum()),
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        let weights = match &self.model {
            AnyModel::Storm(m) => {
                let p = &m.params;
                Weights::Storm {
                    node_weights: (0..p.n_nodes()).map(|n| (0..2).map(|s| to_f64(p.node(n, s))).collect()).collect(),
                    edge_weights: (0..p.n_edges())
                        .map(|e| (0..2).map(|r| (0..2).map(|c| to_f64(p.edge(e, r, c))).collect()).collect())
                        .collect(),
                }
            }
            AnyModel::OrdLog(m) => {
                Weights::OrdLog { w: to_f64(&m.w), threshold_increments: to_f64(&m.threshold_increments) }
            }
            AnyModel::Nest(m) => Weights::Nest {
                classifiers: m.classifiers.iter().map(|w| to_f64(w)).collect(),
                degenerate: m.degenerate.clone(),
            },
            AnyModel::LogReg(m) => {
                Weights::LogReg { class_weights: m.class_weights.iter().map(|w| to_f64(w)).collect() }
            }
        };
        ModelDocument {
            schema_version: SCHEMA_VERSION,
            model_kind: self.model.kind(),
            scalar: ScalarKind::of::<F>(),
            k: self.k(),
            d_raw: self.input_dim(),
            feature_map: self.feature_map.clone(),
            standardization: self.model.standardizer().clone(),
            config: *self.model.config(),
            weights,
            diagnostics: self.model.diagnostics().clone(),
            cv: self.cv.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(StormError::arg(format!(
                "unsupported model schema version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        if doc.scalar != ScalarKind::of::<F>() {
            return Err(StormError::arg(format!(
                "model stored as {:?}, requested {:?}",
                doc.scalar,
                ScalarKind::of::<F>()
            )));
        }
        doc.config.validate()?;
        let std = doc.standardization;
        if std.mean.len() != std.scale.len() || std.scale.iter().any(|s| !(*s > 0.0)) {
            return Err(StormError::arg("standardization vectors are malformed"));
        }
        let mapped_dim = doc.feature_map.as_ref().map_or(doc.d_raw, NystroemMap::output_dim);
        if let Some(map) = &doc.feature_map {
            if map.input_dim() != doc.d_raw {
                return Err(StormError::DimensionMismatch { expected: doc.d_raw, got: map.input_dim() });
            }
        }
        if std.dim() != mapped_dim {
            return Err(StormError::DimensionMismatch { expected: mapped_dim, got: std.dim() });
        }
        let (k, d, config, diagnostics) = (doc.k, std.dim() + 1, doc.config, doc.diagnostics);
        let model = match (doc.model_kind, doc.weights) {
            (ModelKind::Storm, Weights::Storm { node_weights, edge_weights }) => {
                let mut flat = Vec::with_capacity(ChainCrfParams::<F>::len_for(k, d));
                if node_weights.len() + 1 != k || edge_weights.len() + 2 != k {
                    return Err(StormError::arg("StORM weight arrays do not match K"));
                }
                for row in node_weights.iter().flatten() {
                    flat.extend(from_f64::<F>(row));
                }
                for row in edge_weights.iter().flatten().flatten() {
                    flat.extend(from_f64::<F>(row));
                }
                let params = ChainCrfParams::from_flat(k, d, flat)?;
                AnyModel::Storm(StormModel { params, config, standardizer: std, diagnostics })
            }
            (ModelKind::OrdLog, Weights::OrdLog { w, threshold_increments }) => {
                let m = OrderedLogitModel {
                    k,
                    w: from_f64(&w),
                    threshold_increments: from_f64(&threshold_increments),
                    config,
                    standardizer: std,
                    diagnostics,
                };
                m.validate_shape()?;
                AnyModel::OrdLog(m)
            }
            (ModelKind::Nest, Weights::Nest { classifiers, degenerate }) => {
                let m = NestedBinaryModel {
                    k,
                    classifiers: classifiers.iter().map(|w| from_f64(w)).collect(),
                    config,
                    standardizer: std,
                    degenerate,
                    diagnostics,
                };
                m.validate_shape()?;
                AnyModel::Nest(m)
            }
            (ModelKind::LogReg, Weights::LogReg { class_weights }) => {
                let m = MultinomialLogisticModel {
                    k,
                    class_weights: class_weights.iter().map(|w| from_f64(w)).collect(),
                    config,
                    standardizer: std,
                    diagnostics,
                };
                m.validate_shape()?;
                AnyModel::LogReg(m)
            }
            (kind, _) => return Err(StormError::arg(format!("weights do not belong to a '{kind}' model"))),
        };
        Ok(Self { feature_map: doc.feature_map, model, cv: doc.cv })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        write_atomic(path.as_ref(), text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl<F: Scalar> OrdinalClassifier for Predictor<F> {
    fn k(&self) -> usize {
        self.model.k()
    }

    fn input_dim(&self) -> usize {
        self.feature_map.as_ref().map_or_else(|| self.model.input_dim(), NystroemMap::input_dim)
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        self.model.predict(&self.mapped(x)?)
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.model.predict_proba(&self.mapped(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticKind};

    #[test]
    fn every_kind_round_trips_exactly() {
        let d = make_synthetic(SyntheticKind::Sine, 60, 4, 0.05, 1).unwrap();
        for kind in ModelKind::ALL {
            let p = Predictor::<f64>::train(kind, &d, &TrainConfig::default(), &[0.5], None).unwrap();
            let back = Predictor::<f64>::from_json(&p.to_json().unwrap()).unwrap();
            assert_eq!(back, p, "{kind}");
            assert!(Predictor::<f32>::from_json(&p.to_json().unwrap()).is_err());
        }
    }

    #[test]
    fn nystroem_predictor_round_trips() {
        let d = make_synthetic(SyntheticKind::Circle, 50, 3, 0.05, 4).unwrap();
        let p =
            Predictor::<f32>::train(ModelKind::Storm, &d, &TrainConfig::default(), &[1.0], Some((20, 2.0))).unwrap();
        let back = Predictor::<f32>::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.input_dim(), 2);
        for x in d.rows().take(10) {
            assert_eq!(back.predict_proba(x).unwrap(), p.predict_proba(x).unwrap());
        }
    }

    #[test]
    fn mismatched_weights_rejected() {
        let d = make_synthetic(SyntheticKind::Linear, 30, 3, 0.05, 1).unwrap();
        let p = Predictor::<f64>::train(ModelKind::OrdLog, &d, &TrainConfig::default(), &[1.0], None).unwrap();
        let mut doc = p.to_document();
        doc.model_kind = ModelKind::Nest;
        assert!(Predictor::<f64>::from_document(doc.clone()).is_err());
        doc.model_kind = ModelKind::OrdLog;
        doc.schema_version = 99;
        assert!(Predictor::<f64>::from_document(doc).is_err());
    }
}
