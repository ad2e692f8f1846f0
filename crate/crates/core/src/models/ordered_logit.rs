use serde::{Deserialize, Serialize};

use super::cv::{select_l2, CvSelection};
use super::{argmax_label, check_training_data, distinct_labels, FitDiagnostics, OrdinalClassifier, TrainConfig};
use crate::chain_crf::{dot, DesignRows};
use crate::data::{OrdinalDataset, Standardizer};
use crate::error::{Result, StormError};
use crate::optim::minimize_observed;
use crate::scalar::{log_sigmoid, sigmoid, Scalar};

/// Proportional-odds model `P(y <= k | x) = σ(θ_k - wᵀx)`.
///
/// Thresholds are stored as log-increments: `θ_1 = 0` and `θ_{k+1} = θ_k + exp(inc_k)`,
/// so any real-valued increment vector yields strictly increasing thresholds. The bias
/// entry of `w` (last) is unpenalised and plays the role of the free location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OrderedLogitModel<F: Scalar> {
    pub k: usize,
    pub w: Vec<F>,
    pub threshold_increments: Vec<F>,
    pub config: TrainConfig,
    pub standardizer: Standardizer,
    pub diagnostics: FitDiagnostics,
}

/// `θ_1..θ_{K-1}` from the log-increments.
pub fn thresholds_from<F: Scalar>(increments: &[F]) -> Vec<F> {
    let mut th = Vec::with_capacity(increments.len() + 1);
    let mut acc = F::zero();
    th.push(acc);
    for &inc in increments {
        acc += inc.exp();
        th.push(acc);
    }
    th
}

/// Class probabilities for latent score `s` given thresholds `θ_1..θ_{K-1}`.
pub fn ol_proba<F: Scalar>(s: F, thresholds: &[F]) -> Vec<F> {
    let mut out = Vec::with_capacity(thresholds.len() + 1);
    let mut prev = F::zero();
    for &t in thresholds {
        let c = sigmoid(t - s);
        out.push(c - prev);
        prev = c;
    }
    out.push(F::one() - prev);
    out
}

/// Penalised NLL over `[w | increments]`; writes the gradient when asked.
pub(crate) struct OlObjective<F: Scalar> {
    pub(crate) k: usize,
    pub(crate) design: DesignRows<F>,
    pub(crate) labels: Vec<usize>,
    pub(crate) l2: F,
}

impl<F: Scalar> OlObjective<F> {
    pub(crate) fn evaluate(&self, params: &[F], grad: Option<&mut [F]>) -> F {
        let d = self.design.cols();
        let (w, inc) = params.split_at(d);
        let th = thresholds_from(inc);
        let mut value = F::lit(0.5) * self.l2 * w[..d - 1].iter().map(|&v| v * v).sum::<F>();
        let mut g_w = vec![F::zero(); d];
        let mut g_th = vec![F::zero(); self.k - 1];
        for (j, &y) in self.labels.iter().enumerate() {
            let x = self.design.row(j);
            let s = dot(w, x);
            // dlogP/da and dlogP/db for a = θ_y - s, b = θ_{y-1} - s.
            let (log_p, da, db) = if y == 1 {
                let a = th[0] - s;
                (log_sigmoid(a), sigmoid(-a), F::zero())
            } else if y == self.k {
                let b = th[self.k - 2] - s;
                (log_sigmoid(-b), F::zero(), -sigmoid(b))
            } else {
                let a = th[y - 1] - s;
                let b = th[y - 2] - s;
                let gap = a - b;
                let inv = F::one() / gap.exp_m1();
                (log_sigmoid(a) + log_sigmoid(-b) + (-(-gap).exp_m1()).ln(), sigmoid(-a) + inv, -sigmoid(b) - inv)
            };
            value -= log_p;
            // NLL = -log P; a and b both move with -s.
            let ds = da + db;
            for (g, &xi) in g_w.iter_mut().zip(x) {
                *g += ds * xi;
            }
            if y < self.k {
                g_th[y - 1] -= da;
            }
            if y > 1 {
                g_th[y - 2] -= db;
            }
        }
        if let Some(grad) = grad {
            for i in 0..d {
                grad[i] = g_w[i] + if i < d - 1 { self.l2 * w[i] } else { F::zero() };
            }
            // θ_k = Σ_{i<k} exp(inc_i): each increment feeds every later threshold.
            let mut tail = F::zero();
            for i in (0..inc.len()).rev() {
                tail += g_th[i + 1];
                grad[d + i] = inc[i].exp() * tail;
            }
        }
        value
    }
}

impl<F: Scalar> OrderedLogitModel<F> {
    pub fn fit(data: &OrdinalDataset, config: &TrainConfig) -> Result<Self> {
        Self::fit_observed(data, config, |_| {})
    }

    /// As [`fit`](Self::fit), passing the realised thresholds of every accepted optimiser
    /// iterate (and the start point) to `observe`.
    pub fn fit_observed(data: &OrdinalDataset, config: &TrainConfig, mut observe: impl FnMut(&[F])) -> Result<Self> {
        config.validate()?;
        check_training_data(data)?;
        let standardizer = Standardizer::fit(data)?;
        let design = standardizer.design::<F>(data)?;
        let d = design.cols();
        let k = data.k();
        let obj = OlObjective { k, design, labels: data.labels().to_vec(), l2: F::lit(config.l2_strength) };
        let x0 = vec![F::zero(); d + k - 2];
        let min = minimize_observed(&|p: &[F], g: &mut [F]| obj.evaluate(p, Some(g)), x0, &config.lbfgs(), |p| {
            observe(&thresholds_from(&p[d..]))
        });
        let mut diagnostics = FitDiagnostics::from_minimum(&min);
        if distinct_labels(data) < 2 {
            diagnostics.warnings.push("single class in training data; thresholds pushed outward".into());
        }
        let (w, inc) = min.x.split_at(d);
        Ok(Self { k, w: w.to_vec(), threshold_increments: inc.to_vec(), config: *config, standardizer, diagnostics })
    }

    pub fn fit_cv(data: &OrdinalDataset, grid: &[f64], config: &TrainConfig) -> Result<(Self, CvSelection)> {
        select_l2(data, grid, config, Self::fit)
    }

    /// Penalised loss and gradient at `[w | increments]`, on features that already include
    /// the bias column.
    pub fn penalised_nll(data: &OrdinalDataset, params: &[F], l2: F) -> Result<(F, Vec<F>)> {
        let (k, d) = (data.k(), data.dim());
        if params.len() != d + k - 2 {
            return Err(StormError::DimensionMismatch { expected: d + k - 2, got: params.len() });
        }
        let flat = data.features().iter().map(|&v| F::lit(v)).collect();
        let design = DesignRows::new(data.len(), d, flat)?;
        let obj = OlObjective { k, design, labels: data.labels().to_vec(), l2 };
        let mut grad = vec![F::zero(); params.len()];
        let v = obj.evaluate(params, Some(&mut grad));
        Ok((v, grad))
    }

    /// Realised thresholds `θ_1 < … < θ_{K-1}`.
    pub fn thresholds(&self) -> Vec<F> {
        thresholds_from(&self.threshold_increments)
    }

    /// Latent score `wᵀx` for a raw feature vector.
    pub fn latent(&self, x: &[f64]) -> Result<F> {
        let row = self.standardizer.design_row::<F>(x)?;
        Ok(dot(&self.w, &row))
    }

    pub(crate) fn validate_shape(&self) -> Result<()> {
        if self.k < 2 || self.threshold_increments.len() != self.k - 2 || self.w.len() != self.standardizer.dim() + 1 {
            return Err(StormError::arg("ordered logit weights do not match K and D"));
        }
        Ok(())
    }
}

impl<F: Scalar> OrdinalClassifier for OrderedLogitModel<F> {
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
        let s = self.latent(x)?;
        Ok(ol_proba(s, &self.thresholds()).iter().map(|p| p.as_f64()).collect())
    }
}
