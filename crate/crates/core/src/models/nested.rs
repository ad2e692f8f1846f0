use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{select_l2, CvSelection};
use super::{argmax_label, check_training_data, FitDiagnostics, OrdinalClassifier, TrainConfig};
use crate::chain_crf::{dot, DesignRows};
use crate::data::{OrdinalDataset, Standardizer};
use crate::error::{Result, StormError};
use crate::optim::minimize;
use crate::scalar::{log_sigmoid, sigmoid, Scalar};

/// Intercept penalty used for a classifier whose repartition holds a single class, so
/// that its intercept settles at a finite prior instead of drifting.
const DEGENERATE_INTERCEPT_L2: f64 = 1e-2;

/// Frank-Hall style ensemble: classifier `k` (1-based) models `P(label > k | x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NestedBinaryModel<F: Scalar> {
    pub k: usize,
    pub classifiers: Vec<Vec<F>>,
    pub config: TrainConfig,
    pub standardizer: Standardizer,
    /// 1-based indices of classifiers trained on a single-class repartition.
    pub degenerate: Vec<usize>,
    pub diagnostics: FitDiagnostics,
}

/// Binary logistic loss with ℓ2 on every column except the bias, which gets
/// `intercept_l2` instead.
struct BinaryObjective<'a, F: Scalar> {
    design: &'a DesignRows<F>,
    targets: Vec<bool>,
    l2: F,
    intercept_l2: F,
}

impl<F: Scalar> BinaryObjective<'_, F> {
    fn evaluate(&self, w: &[F], grad: &mut [F]) -> F {
        let d = w.len();
        let mut value = F::zero();
        for (i, (g, &wi)) in grad.iter_mut().zip(w).enumerate() {
            let lam = if i == d - 1 { self.intercept_l2 } else { self.l2 };
            value += F::lit(0.5) * lam * wi * wi;
            *g = lam * wi;
        }
        for (j, &t) in self.targets.iter().enumerate() {
            let x = self.design.row(j);
            let s = dot(w, x);
            let (loss, resid) =
                if t { (-log_sigmoid(s), sigmoid(s) - F::one()) } else { (-log_sigmoid(-s), sigmoid(s)) };
            value += loss;
            for (g, &xi) in grad.iter_mut().zip(x) {
                *g += resid * xi;
            }
        }
        value
    }
}

/// Combines `q_k = P(label > k)` into a label distribution: raw differences with
/// `P(label > 0) = 1` and `P(label > K) = 0`, negatives clipped to zero and the rest
/// renormalised; uniform when nothing positive remains.
pub fn nest_combine<F: Scalar>(q: &[F]) -> Vec<F> {
    let k = q.len() + 1;
    let mut p = Vec::with_capacity(k);
    let mut prev = F::one();
    for &qk in q {
        p.push(prev - qk);
        prev = qk;
    }
    p.push(prev);
    for v in p.iter_mut() {
        if !(*v > F::zero()) {
            *v = F::zero();
        }
    }
    let total: F = p.iter().copied().sum();
    if total > F::zero() {
        p.iter_mut().for_each(|v| *v /= total);
    } else {
        p.iter_mut().for_each(|v| *v = F::one() / F::lit(k as f64));
    }
    p
}

impl<F: Scalar> NestedBinaryModel<F> {
    /// Trains the `K-1` classifiers independently (in parallel).
    pub fn fit(data: &OrdinalDataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        check_training_data(data)?;
        let standardizer = Standardizer::fit(data)?;
        let design = standardizer.design::<F>(data)?;
        let k = data.k();
        let fits: Vec<(Vec<F>, FitDiagnostics, bool)> = (1..k)
            .into_par_iter()
            .map(|split| {
                let targets: Vec<bool> = data.labels().iter().map(|&y| y > split).collect();
                let positives = targets.iter().filter(|&&t| t).count();
                let degenerate = positives == 0 || positives == targets.len();
                let l2 = F::lit(config.l2_strength);
                let obj = BinaryObjective {
                    design: &design,
                    targets,
                    l2,
                    intercept_l2: if degenerate { l2.max(F::lit(DEGENERATE_INTERCEPT_L2)) } else { F::zero() },
                };
                let min = minimize(
                    &|w: &[F], g: &mut [F]| obj.evaluate(w, g),
                    vec![F::zero(); design.cols()],
                    &config.lbfgs(),
                );
                let mut diag = FitDiagnostics::from_minimum(&min);
                for w in diag.warnings.iter_mut() {
                    *w = format!("classifier {split}: {w}");
                }
                if degenerate {
                    diag.warnings.push(format!("classifier {split}: repartition has a single class"));
                }
                (min.x, diag, degenerate)
            })
            .collect();

        let mut diagnostics = FitDiagnostics { converged: true, ..FitDiagnostics::default() };
        let mut classifiers = Vec::with_capacity(k - 1);
        let mut degenerate = Vec::new();
        for (i, (w, diag, deg)) in fits.into_iter().enumerate() {
            classifiers.push(w);
            diagnostics.merge(diag);
            if deg {
                degenerate.push(i + 1);
            }
        }
        Ok(Self { k, classifiers, config: *config, standardizer, degenerate, diagnostics })
    }

    pub fn fit_cv(data: &OrdinalDataset, grid: &[f64], config: &TrainConfig) -> Result<(Self, CvSelection)> {
        select_l2(data, grid, config, Self::fit)
    }

    /// Penalised loss and gradient of classifier `split` (targets `label > split`) at
    /// `w`, on features that already include the bias column. The bias is unpenalised.
    pub fn classifier_nll(data: &OrdinalDataset, split: usize, w: &[F], l2: F) -> Result<(F, Vec<F>)> {
        if w.len() != data.dim() {
            return Err(StormError::DimensionMismatch { expected: data.dim(), got: w.len() });
        }
        if split < 1 || split >= data.k() {
            return Err(StormError::arg(format!("split {split} outside 1..{}", data.k())));
        }
        let flat = data.features().iter().map(|&v| F::lit(v)).collect();
        let design = DesignRows::new(data.len(), data.dim(), flat)?;
        let targets = data.labels().iter().map(|&y| y > split).collect();
        let obj = BinaryObjective { design: &design, targets, l2, intercept_l2: F::zero() };
        let mut grad = vec![F::zero(); w.len()];
        let v = obj.evaluate(w, &mut grad);
        Ok((v, grad))
    }

    /// `P(label > k | x)` for `k = 1..K-1`.
    pub fn exceedance(&self, x: &[f64]) -> Result<Vec<F>> {
        let row = self.standardizer.design_row::<F>(x)?;
        Ok(self.classifiers.iter().map(|w| sigmoid(dot(w, &row))).collect())
    }

    pub(crate) fn validate_shape(&self) -> Result<()> {
        let d = self.standardizer.dim() + 1;
        if self.k < 2 || self.classifiers.len() != self.k - 1 || self.classifiers.iter().any(|w| w.len() != d) {
            return Err(StormError::arg("nested classifier weights do not match K and D"));
        }
        Ok(())
    }
}

impl<F: Scalar> OrdinalClassifier for NestedBinaryModel<F> {
    fn k(&self) -> usize {
        self.k
    }

    fn input_dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Argmax of the combined distribution over all `K-1` classifiers.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_label(&self.predict_proba(x)?))
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(nest_combine(&self.exceedance(x)?).iter().map(|p| p.as_f64()).collect())
    }
}
