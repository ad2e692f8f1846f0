use serde::{Deserialize, Serialize};

use super::cv::{select_l2, CvSelection};
use super::{argmax_label, check_training_data, FitDiagnostics, OrdinalClassifier, PredictionRule, TrainConfig};
use crate::chain_crf::{BatchMessages, ChainCrfParams, DesignRows, InferenceMode};
use crate::data::{OrdinalDataset, Standardizer};
use crate::encoding::repair_and_decode;
use crate::error::{Result, StormError};
use crate::optim::minimize;
use crate::scalar::Scalar;

/// Negative log-likelihood of the encoded labels plus the ℓ2 penalty, over a design
/// matrix whose last column is the bias.
pub(crate) struct StormObjective<F: Scalar> {
    k: usize,
    design: DesignRows<F>,
    codes: Vec<Vec<u8>>,
    l2: F,
    mode: InferenceMode,
}

impl<F: Scalar> StormObjective<F> {
    pub(crate) fn new(k: usize, design: DesignRows<F>, labels: &[usize], l2: F, mode: InferenceMode) -> Result<Self> {
        if design.rows() != labels.len() {
            return Err(StormError::DimensionMismatch { expected: labels.len(), got: design.rows() });
        }
        let codes = labels
            .iter()
            .map(|&y| crate::encoding::encode_label(y, k).map(|c| c.bits().to_vec()))
            .collect::<Result<_>>()?;
        Ok(Self { k, design, codes, l2, mode })
    }

    pub(crate) fn evaluate(&self, w: &[F], grad: Option<&mut [F]>) -> F {
        let params = ChainCrfParams::from_flat(self.k, self.design.cols(), w.to_vec())
            .expect("weight vector length fixed by the objective");
        let d = params.dim();
        let msgs =
            BatchMessages::compute(&params, &self.design, self.mode).expect("design width checked on construction");

        let mut value = F::lit(0.5) * self.l2 * params.penalised_sq_norm();
        for (j, code) in self.codes.iter().enumerate() {
            let x = self.design.row(j);
            let mut score = F::zero();
            for (n, &b) in code.iter().enumerate() {
                score += crate::chain_crf::dot(params.node(n, b as usize), x);
            }
            for (e, pair) in code.windows(2).enumerate() {
                score += crate::chain_crf::dot(params.edge(e, pair[0] as usize, pair[1] as usize), x);
            }
            value += msgs.log_z()[j] - score;
        }

        if let Some(grad) = grad {
            for (g, (i, &wi)) in grad.iter_mut().zip(w.iter().enumerate()) {
                *g = if i % d == d - 1 { F::zero() } else { self.l2 * wi };
            }
            for (j, code) in self.codes.iter().enumerate() {
                let x = self.design.row(j);
                for (n, &b) in code.iter().enumerate() {
                    let m = msgs.node_marginal(n, j);
                    for s in 0..2 {
                        let coef = m[s] - if b as usize == s { F::one() } else { F::zero() };
                        axpy(&mut grad[params.node_index(n, s)..][..d], coef, x);
                    }
                }
                for (e, pair) in code.windows(2).enumerate() {
                    let m = msgs.edge_marginal(e, j);
                    for r in 0..2 {
                        for c in 0..2 {
                            let hit = pair[0] as usize == r && pair[1] as usize == c;
                            let coef = m[r][c] - if hit { F::one() } else { F::zero() };
                            axpy(&mut grad[params.edge_index(e, r, c)..][..d], coef, x);
                        }
                    }
                }
            }
        }
        value
    }
}

fn axpy<F: Scalar>(y: &mut [F], a: F, x: &[F]) {
    if a == F::zero() {
        return;
    }
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn objective_for<F: Scalar>(
    params: &ChainCrfParams<F>,
    data: &OrdinalDataset,
    l2: F,
    mode: InferenceMode,
) -> Result<StormObjective<F>> {
    if data.dim() != params.dim() {
        return Err(StormError::DimensionMismatch { expected: params.dim(), got: data.dim() });
    }
    if data.k() != params.k() {
        return Err(StormError::arg(format!("dataset has K={} but parameters have K={}", data.k(), params.k())));
    }
    if !(l2 >= F::zero()) {
        return Err(StormError::arg("l2 strength must be >= 0"));
    }
    let flat: Vec<F> = data.features().iter().map(|&v| F::lit(v)).collect();
    let design = DesignRows::new(data.len(), data.dim(), flat)?;
    StormObjective::new(params.k(), design, data.labels(), l2, mode)
}

/// `-Σ_j log P(code_j | x_j) + (λ/2) ‖Θ‖²`, bias column excluded from the penalty.
///
/// `data` features must already include the trailing bias column.
pub fn nll<F: Scalar>(params: &ChainCrfParams<F>, data: &OrdinalDataset, l2: F, mode: InferenceMode) -> Result<F> {
    Ok(objective_for(params, data, l2, mode)?.evaluate(params.as_slice(), None))
}

/// Gradient of [`nll`] with respect to every weight, shaped like the parameters.
pub fn nll_gradient<F: Scalar>(
    params: &ChainCrfParams<F>,
    data: &OrdinalDataset,
    l2: F,
    mode: InferenceMode,
) -> Result<ChainCrfParams<F>> {
    let obj = objective_for(params, data, l2, mode)?;
    let mut grad = vec![F::zero(); params.as_slice().len()];
    obj.evaluate(params.as_slice(), Some(&mut grad));
    ChainCrfParams::from_flat(params.k(), params.dim(), grad)
}

/// Fitted StORM estimator: chain weights over standardised features plus bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StormModel<F: Scalar> {
    pub params: ChainCrfParams<F>,
    pub config: TrainConfig,
    pub standardizer: Standardizer,
    pub diagnostics: FitDiagnostics,
}

impl<F: Scalar> StormModel<F> {
    /// Standardises, appends the bias, and minimises the penalised NLL from zero weights.
    pub fn fit(data: &OrdinalDataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        check_training_data(data)?;
        let standardizer = Standardizer::fit(data)?;
        let design = standardizer.design::<F>(data)?;
        let dim = design.cols();
        let obj = StormObjective::new(data.k(), design, data.labels(), F::lit(config.l2_strength), config.mode)?;
        let x0 = vec![F::zero(); ChainCrfParams::<F>::len_for(data.k(), dim)];
        let min = minimize(&|w: &[F], g: &mut [F]| obj.evaluate(w, Some(g)), x0, &config.lbfgs());
        let diagnostics = FitDiagnostics::from_minimum(&min);
        let params = ChainCrfParams::from_flat(data.k(), dim, min.x)?;
        Ok(Self { params, config: *config, standardizer, diagnostics })
    }

    /// Picks λ from `grid` by stratified 5-fold CV on macro MAE, then refits on all of `data`.
    pub fn fit_cv(data: &OrdinalDataset, grid: &[f64], config: &TrainConfig) -> Result<(Self, CvSelection)> {
        select_l2(data, grid, config, Self::fit)
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    /// Chain inference for a raw feature vector.
    pub fn infer(&self, x: &[f64], mode: InferenceMode) -> Result<crate::chain_crf::ChainMessages<F>> {
        let design = self.standardizer.design_row::<F>(x)?;
        self.params.infer(&design, mode)
    }

    /// Label distribution in the model's scalar type.
    pub fn label_distribution(&self, x: &[f64]) -> Result<Vec<F>> {
        let mode = InferenceMode { constrain_transitions: true, ..self.config.mode };
        self.infer(x, mode)?.label_distribution()
    }

    /// `P(a <= label <= b)` under constrained inference.
    pub fn interval_query(&self, x: &[f64], a: usize, b: usize) -> Result<f64> {
        let mode = InferenceMode { constrain_transitions: true, ..self.config.mode };
        Ok(self.infer(x, mode)?.interval_query(a, b)?.as_f64())
    }

    pub fn predict_with(&self, x: &[f64], rule: PredictionRule) -> Result<usize> {
        match rule {
            PredictionRule::Viterbi => {
                let path = self.infer(x, self.config.mode)?.viterbi();
                Ok(repair_and_decode(&path))
            }
            PredictionRule::Marginal => Ok(argmax_label(&self.label_distribution(x)?)),
        }
    }
}

impl<F: Scalar> OrdinalClassifier for StormModel<F> {
    fn k(&self) -> usize {
        self.params.k()
    }

    fn input_dim(&self) -> usize {
        self.standardizer.dim()
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        self.predict_with(x, self.config.prediction)
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.label_distribution(x)?.iter().map(|p| p.as_f64()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_bias(rows: &[Vec<f64>], labels: Vec<usize>, k: usize) -> OrdinalDataset {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().copied().chain([1.0]).collect()).collect();
        OrdinalDataset::from_rows(&rows, labels, k, "t").unwrap()
    }

    #[test]
    fn zero_weights_nll() {
        let d = with_bias(&[vec![0.3]], vec![1], 2);
        let p = ChainCrfParams::<f64>::zeros(2, 2).unwrap();
        assert!((nll(&p, &d, 1.0, InferenceMode::unconstrained()).unwrap() - 2f64.ln()).abs() < 1e-12);
        let d = with_bias(&[vec![0.3]], vec![2], 3);
        let p = ChainCrfParams::<f64>::zeros(3, 2).unwrap();
        assert!((nll(&p, &d, 1.0, InferenceMode::unconstrained()).unwrap() - 4f64.ln()).abs() < 1e-12);
        // constrained: uniform over the 3 valid codes
        assert!((nll(&p, &d, 1.0, InferenceMode::constrained()).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_data_gradient_is_penalty() {
        let d = OrdinalDataset::from_flat(3, vec![], vec![], 4, "t").unwrap();
        let w: Vec<f64> = (0..ChainCrfParams::<f64>::len_for(4, 3)).map(|i| (i as f64 * 0.37).sin()).collect();
        let p = ChainCrfParams::from_flat(4, 3, w.clone()).unwrap();
        let g = nll_gradient(&p, &d, 0.7, InferenceMode::unconstrained()).unwrap();
        for (i, (gi, wi)) in g.as_slice().iter().zip(&w).enumerate() {
            let expect = if i % 3 == 2 { 0.0 } else { 0.7 * wi };
            assert_eq!(*gi, expect);
        }
    }

    #[test]
    fn zero_model_predictions() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let d = OrdinalDataset::from_rows(&rows, vec![1, 1, 2, 2, 3, 3, 4, 4], 4, "t").unwrap();
        let mut m = StormModel::<f64>::fit(&d, &TrainConfig::default().with_l2(1.0)).unwrap();
        m.params = ChainCrfParams::zeros(4, 2).unwrap();
        assert_eq!(m.predict(&[3.0]).unwrap(), 1);
        let p = m.predict_proba(&[3.0]).unwrap();
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-12));
        assert!(m.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn separable_two_class() {
        let rows = vec![vec![-2.0, 0.0], vec![-1.0, 0.5], vec![1.0, -0.5], vec![2.0, 0.0]];
        let d = OrdinalDataset::from_rows(&rows, vec![1, 1, 2, 2], 2, "t").unwrap();
        let m = StormModel::<f64>::fit(&d, &TrainConfig::default()).unwrap();
        assert_eq!(m.predict_dataset(&d).unwrap(), vec![1, 1, 2, 2]);
    }
}
