use serde::{Deserialize, Serialize};

use super::cv::{select_l2, CvSelection};
use super::{argmax_label, check_training_data, FitDiagnostics, OrdinalClassifier, TrainConfig};
use crate::chain_crf::{dot, DesignRows};
use crate::data::{OrdinalDataset, Standardizer};
use crate::error::{Result, StormError};
use crate::optim::minimize;
use crate::scalar::{log_sum_exp, Scalar};

/// Softmax regression over the `K` classes, ignoring their order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MultinomialLogisticModel<F: Scalar> {
    pub k: usize,
    pub class_weights: Vec<Vec<F>>,
    pub config: TrainConfig,
    pub standardizer: Standardizer,
    pub diagnostics: FitDiagnostics,
}

fn softmax<F: Scalar>(scores: &[F]) -> Vec<F> {
    let lse = log_sum_exp(scores);
    scores.iter().map(|&s| (s - lse).exp()).collect()
}

/// Penalised NLL over the flat `K x D` weights (class-major).
fn evaluate<F: Scalar>(k: usize, design: &DesignRows<F>, labels: &[usize], l2: F, w: &[F], grad: &mut [F]) -> F {
    let d = design.cols();
    let mut value = F::zero();
    for (i, (g, &wi)) in grad.iter_mut().zip(w).enumerate() {
        if i % d == d - 1 {
            *g = F::zero();
        } else {
            value += F::lit(0.5) * l2 * wi * wi;
            *g = l2 * wi;
        }
    }
    let mut scores = vec![F::zero(); k];
    for (j, &y) in labels.iter().enumerate() {
        let x = design.row(j);
        for (c, s) in scores.iter_mut().enumerate() {
            *s = dot(&w[c * d..(c + 1) * d], x);
        }
        let lse = log_sum_exp(&scores);
        value += lse - scores[y - 1];
        for c in 0..k {
            let coef = (scores[c] - lse).exp() - if c == y - 1 { F::one() } else { F::zero() };
            for (g, &xi) in grad[c * d..(c + 1) * d].iter_mut().zip(x) {
                *g += coef * xi;
            }
        }
    }
    value
}

impl<F: Scalar> MultinomialLogisticModel<F> {
    pub fn fit(data: &OrdinalDataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        check_training_data(data)?;
        let standardizer = Standardizer::fit(data)?;
        let design = standardizer.design::<F>(data)?;
        let (k, d) = (data.k(), design.cols());
        let l2 = F::lit(config.l2_strength);
        let min = minimize(
            &|w: &[F], g: &mut [F]| evaluate(k, &design, data.labels(), l2, w, g),
            vec![F::zero(); k * d],
            &config.lbfgs(),
        );
        let diagnostics = FitDiagnostics::from_minimum(&min);
        let class_weights = min.x.chunks(d).map(<[F]>::to_vec).collect();
        Ok(Self { k, class_weights, config: *config, standardizer, diagnostics })
    }

    pub fn fit_cv(data: &OrdinalDataset, grid: &[f64], config: &TrainConfig) -> Result<(Self, CvSelection)> {
        select_l2(data, grid, config, Self::fit)
    }

    /// Penalised loss and gradient at flat class-major weights `w`, on features that
    /// already include the bias column.
    pub fn penalised_nll(data: &OrdinalDataset, w: &[F], l2: F) -> Result<(F, Vec<F>)> {
        let (k, d) = (data.k(), data.dim());
        if w.len() != k * d {
            return Err(StormError::DimensionMismatch { expected: k * d, got: w.len() });
        }
        let flat = data.features().iter().map(|&v| F::lit(v)).collect();
        let design = DesignRows::new(data.len(), d, flat)?;
        let mut grad = vec![F::zero(); w.len()];
        let v = evaluate(k, &design, data.labels(), l2, w, &mut grad);
        Ok((v, grad))
    }

    pub(crate) fn validate_shape(&self) -> Result<()> {
        let d = self.standardizer.dim() + 1;
        if self.k < 2 || self.class_weights.len() != self.k || self.class_weights.iter().any(|w| w.len() != d) {
            return Err(StormError::arg("multinomial weights do not match K and D"));
        }
        Ok(())
    }
}

impl<F: Scalar> OrdinalClassifier for MultinomialLogisticModel<F> {
    fn k(&self) -> usize {
        self.k
    }

    fn input_dim(&self) -> usize {
        self.standardizer.dim()
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_label(&self.predict_proba(x)?))
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let row = self.standardizer.design_row::<F>(x)?;
        let scores: Vec<F> = self.class_weights.iter().map(|w| dot(w, &row)).collect();
        Ok(softmax(&scores).iter().map(|p| p.as_f64()).collect())
    }
}
