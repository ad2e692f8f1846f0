//! Heterogeneous linear-chain CRF over the `K-1` bits of a cumulative label code.
//!
//! Every node `n` owns a `2 x D` weight matrix and every edge `e` (linking node `e` to
//! node `e+1`) owns a `2 x 2 x D` tensor; no weights are shared across positions.
//! Edge tensors are indexed `[row = state of node e][col = state of node e+1]`, so
//! the forbidden `0 -> 1` transition is cell `(0, 1)`.

mod batch;
mod messages;

pub use batch::{BatchMessages, DesignRows};
pub use messages::ChainMessages;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StormError};
use crate::scalar::Scalar;

/// Arithmetic domain used by the message recursions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Exp domain for short chains with moderate scores, log domain otherwise.
    #[default]
    Auto,
    Exp,
    Log,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InferenceMode {
    pub domain: Domain,
    /// Zero the `0 -> 1` cell of every edge potential so only valid codes carry mass.
    pub constrain_transitions: bool,
}

impl InferenceMode {
    pub fn constrained() -> Self {
        Self { domain: Domain::Auto, constrain_transitions: true }
    }

    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }
}

/// Largest per-entry score magnitude for which the exp domain is considered.
pub const EXP_DOMAIN_MAX_SCORE: f64 = 200.0;
/// Chains with `K` at or above this always run in the log domain.
pub const EXP_DOMAIN_MAX_K: usize = 30;

/// Picks the concrete domain for a chain of `k` categories.
///
/// `total_abs_score` is the sum over positions of the largest absolute node/edge score;
/// it bounds `|log Z|` up to `(K-1) ln 2`, so requiring it to stay well inside the
/// exponent range keeps every forward/backward entry representable.
pub fn resolve_domain<F: Scalar>(requested: Domain, k: usize, max_abs_score: F, total_abs_score: F) -> Domain {
    match requested {
        Domain::Exp | Domain::Log => requested,
        Domain::Auto => {
            let headroom = F::lit(0.9) * F::min_positive_value().ln().abs().min(F::max_value().ln());
            let bound = total_abs_score + F::lit((k as f64 - 1.0) * std::f64::consts::LN_2);
            if k < EXP_DOMAIN_MAX_K && max_abs_score < F::lit(EXP_DOMAIN_MAX_SCORE) && bound < headroom {
                Domain::Exp
            } else {
                Domain::Log
            }
        }
    }
}

/// Weights `Θ` of the chain: node matrices `W^(n)` and edge tensors `U^(e)`.
///
/// Stored as one flat vector, node block first (`[n][state][d]`), then the edge block
/// (`[e][row][col][d]`). The flat view is what the optimiser works on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ChainCrfParams<F: Scalar> {
    k: usize,
    dim: usize,
    weights: Vec<F>,
}

impl<F: Scalar> ChainCrfParams<F> {
    pub fn zeros(k: usize, dim: usize) -> Result<Self> {
        if k < 2 {
            return Err(StormError::arg(format!("K must be at least 2, got {k}")));
        }
        if dim == 0 {
            return Err(StormError::arg("feature dimension must be positive"));
        }
        Ok(Self { k, dim, weights: vec![F::zero(); Self::len_for(k, dim)] })
    }

    pub fn from_flat(k: usize, dim: usize, weights: Vec<F>) -> Result<Self> {
        let mut p = Self::zeros(k, dim)?;
        if weights.len() != p.weights.len() {
            return Err(StormError::DimensionMismatch { expected: p.weights.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(StormError::arg("chain weights must be finite"));
        }
        p.weights = weights;
        Ok(p)
    }

    /// Number of scalar parameters for `k` categories and `dim` features.
    pub fn len_for(k: usize, dim: usize) -> usize {
        let nodes = k - 1;
        let edges = k.saturating_sub(2);
        nodes * 2 * dim + edges * 4 * dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Feature dimension including the bias column.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.k - 1
    }

    pub fn n_edges(&self) -> usize {
        self.k - 2
    }

    pub fn as_slice(&self) -> &[F] {
        &self.weights
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.weights
    }

    pub fn into_flat(self) -> Vec<F> {
        self.weights
    }

    fn edge_offset(&self) -> usize {
        self.n_nodes() * 2 * self.dim
    }

    pub fn node_index(&self, node: usize, state: usize) -> usize {
        debug_assert!(node < self.n_nodes() && state < 2);
        (node * 2 + state) * self.dim
    }

    pub fn edge_index(&self, edge: usize, row: usize, col: usize) -> usize {
        debug_assert!(edge < self.n_edges() && row < 2 && col < 2);
        self.edge_offset() + ((edge * 2 + row) * 2 + col) * self.dim
    }

    /// Weight row `W^(n)_state`, length `D`.
    pub fn node(&self, node: usize, state: usize) -> &[F] {
        let i = self.node_index(node, state);
        &self.weights[i..i + self.dim]
    }

    pub fn node_mut(&mut self, node: usize, state: usize) -> &mut [F] {
        let i = self.node_index(node, state);
        let d = self.dim;
        &mut self.weights[i..i + d]
    }

    /// Weight row `U^(e)_{row,col}`, length `D`.
    pub fn edge(&self, edge: usize, row: usize, col: usize) -> &[F] {
        let i = self.edge_index(edge, row, col);
        &self.weights[i..i + self.dim]
    }

    pub fn edge_mut(&mut self, edge: usize, row: usize, col: usize) -> &mut [F] {
        let i = self.edge_index(edge, row, col);
        let d = self.dim;
        &mut self.weights[i..i + d]
    }

    /// Node and edge scores `W^(n) x`, `U^(e) x` (log-potentials, before constraints).
    pub fn scores(&self, x: &[F]) -> Result<(Vec<[F; 2]>, Vec<[[F; 2]; 2]>)> {
        if x.len() != self.dim {
            return Err(StormError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(StormError::NonFinite { row: 0, column: col, value: x[col].as_f64() });
        }
        Ok(self.scores_unchecked(x))
    }

    pub(crate) fn scores_unchecked(&self, x: &[F]) -> (Vec<[F; 2]>, Vec<[[F; 2]; 2]>) {
        let nodes = (0..self.n_nodes()).map(|n| [dot(self.node(n, 0), x), dot(self.node(n, 1), x)]).collect();
        let edges = (0..self.n_edges())
            .map(|e| {
                [
                    [dot(self.edge(e, 0, 0), x), dot(self.edge(e, 0, 1), x)],
                    [dot(self.edge(e, 1, 0), x), dot(self.edge(e, 1, 1), x)],
                ]
            })
            .collect();
        (nodes, edges)
    }

    /// Potentials for one feature vector, ready for [`ChainMessages::forward_backward`].
    pub fn compute_potentials(&self, x: &[F], mode: InferenceMode) -> Result<ChainMessages<F>> {
        let (nodes, edges) = self.scores(x)?;
        Ok(ChainMessages::from_scores(nodes, edges, mode))
    }

    /// Potentials plus a completed forward-backward pass.
    pub fn infer(&self, x: &[F], mode: InferenceMode) -> Result<ChainMessages<F>> {
        let mut msgs = self.compute_potentials(x, mode)?;
        msgs.forward_backward();
        Ok(msgs)
    }

    /// Squared ℓ2 norm over every feature column except the trailing bias column.
    pub fn penalised_sq_norm(&self) -> F {
        let d = self.dim;
        self.weights.chunks(d).map(|row| row[..d - 1].iter().map(|&w| w * w).sum::<F>()).sum()
    }

    pub fn cast<G: Scalar>(&self) -> ChainCrfParams<G> {
        ChainCrfParams { k: self.k, dim: self.dim, weights: self.weights.iter().map(|w| G::lit(w.as_f64())).collect() }
    }
}

#[inline]
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}
