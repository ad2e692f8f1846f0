use crate::error::{Result, StormError};
use crate::scalar::Scalar;

use super::messages::{
    backward_step, forward_step, hadamard, normalise, normaliser, potentials_from_scores, score_bounds, total, unit,
};
use super::{ChainCrfParams, Domain, InferenceMode};

/// Row-major `N x D` design matrix (features already standardised, bias included).
#[derive(Clone, Debug, PartialEq)]
pub struct DesignRows<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> DesignRows<F> {
    pub fn new(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(StormError::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(StormError::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[F]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }
}

/// Messages for a whole dataset, stored position-major (`[node][instance]`) so each
/// step of the forward and backward sweeps updates every instance together.
#[derive(Clone, Debug)]
pub struct BatchMessages<F: Scalar> {
    domain: Domain,
    instances: usize,
    node_potentials: Vec<Vec<[F; 2]>>,
    edge_potentials: Vec<Vec<[[F; 2]; 2]>>,
    forward: Vec<Vec<[F; 2]>>,
    backward: Vec<Vec<[F; 2]>>,
    gamma: Vec<Vec<[F; 2]>>,
    delta: Vec<Vec<[F; 2]>>,
    log_z: Vec<F>,
    z: Vec<F>,
}

impl<F: Scalar> BatchMessages<F> {
    pub fn compute(params: &ChainCrfParams<F>, design: &DesignRows<F>, mode: InferenceMode) -> Result<Self> {
        if design.cols() != params.dim() {
            return Err(StormError::DimensionMismatch { expected: params.dim(), got: design.cols() });
        }
        let len = params.n_nodes();
        let n_inst = design.rows();

        // Per-instance potentials; Auto resolves to Exp only if every instance allows it.
        let mut per_instance = Vec::with_capacity(n_inst);
        let mut all_exp = true;
        for x in design.iter_rows() {
            let (mut nodes, mut edges) = params.scores_unchecked(x);
            let d = potentials_from_scores(&mut nodes, &mut edges, mode.with_domain(Domain::Log), params.k());
            debug_assert_eq!(d, Domain::Log);
            if mode.domain == Domain::Auto {
                let (max_abs, total) = score_bounds(&nodes, &edges);
                all_exp &= super::resolve_domain(Domain::Auto, params.k(), max_abs, total) == Domain::Exp;
            }
            per_instance.push((nodes, edges));
        }
        let domain = match mode.domain {
            Domain::Auto if all_exp => Domain::Exp,
            Domain::Auto => Domain::Log,
            d => d,
        };

        let mut node_potentials = vec![Vec::with_capacity(n_inst); len];
        let mut edge_potentials = vec![Vec::with_capacity(n_inst); len.saturating_sub(1)];
        for (nodes, edges) in per_instance {
            for (n, v) in nodes.into_iter().enumerate() {
                node_potentials[n].push(match domain {
                    Domain::Log => v,
                    _ => [v[0].exp(), v[1].exp()],
                });
            }
            for (e, v) in edges.into_iter().enumerate() {
                edge_potentials[e].push(match domain {
                    Domain::Log => v,
                    _ => [[v[0][0].exp(), v[0][1].exp()], [v[1][0].exp(), v[1][1].exp()]],
                });
            }
        }

        let mut forward = vec![vec![unit(domain); n_inst]; len];
        let mut gamma = vec![vec![unit(domain); n_inst]; len];
        for n in 0..len {
            for j in 0..n_inst {
                gamma[n][j] = hadamard(domain, forward[n][j], node_potentials[n][j]);
            }
            if n + 1 < len {
                for j in 0..n_inst {
                    forward[n + 1][j] = forward_step(domain, &edge_potentials[n][j], gamma[n][j]);
                }
            }
        }
        let mut backward = vec![vec![unit(domain); n_inst]; len];
        let mut delta = vec![vec![unit(domain); n_inst]; len];
        for n in (0..len).rev() {
            for j in 0..n_inst {
                delta[n][j] = hadamard(domain, node_potentials[n][j], backward[n][j]);
            }
            if n > 0 {
                for j in 0..n_inst {
                    backward[n - 1][j] = backward_step(domain, &edge_potentials[n - 1][j], delta[n][j]);
                }
            }
        }
        let (log_z, z) =
            (0..n_inst).map(|j| normaliser(domain, total(domain, gamma[len - 1][j], backward[len - 1][j]))).unzip();

        Ok(Self {
            domain,
            instances: n_inst,
            node_potentials,
            edge_potentials,
            forward,
            backward,
            gamma,
            delta,
            log_z,
            z,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn instances(&self) -> usize {
        self.instances
    }

    pub fn log_z(&self) -> &[F] {
        &self.log_z
    }

    pub fn forward(&self, node: usize) -> &[[F; 2]] {
        &self.forward[node]
    }

    pub fn backward(&self, node: usize) -> &[[F; 2]] {
        &self.backward[node]
    }

    pub fn node_marginal(&self, node: usize, instance: usize) -> [F; 2] {
        let (lz, z) = (self.log_z[instance], self.z[instance]);
        let v = hadamard(self.domain, self.gamma[node][instance], self.backward[node][instance]);
        [normalise(self.domain, v[0], lz, z), normalise(self.domain, v[1], lz, z)]
    }

    pub fn edge_marginal(&self, edge: usize, instance: usize) -> [[F; 2]; 2] {
        let (lz, z) = (self.log_z[instance], self.z[instance]);
        let g = self.gamma[edge][instance];
        let dl = self.delta[edge + 1][instance];
        let psi = &self.edge_potentials[edge][instance];
        let mut m = [[F::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let v = match self.domain {
                    Domain::Log => g[i] + psi[i][j] + dl[j],
                    _ => g[i] * psi[i][j] * dl[j],
                };
                m[i][j] = normalise(self.domain, v, lz, z);
            }
        }
        m
    }

    /// Unnormalised log-score of `bits` for one instance.
    pub fn log_score(&self, instance: usize, bits: &[u8]) -> F {
        let ln = |v: F| match self.domain {
            Domain::Log => v,
            _ => v.ln(),
        };
        let mut s = F::zero();
        for (n, &b) in bits.iter().enumerate() {
            s += ln(self.node_potentials[n][instance][b as usize]);
        }
        for (e, w) in bits.windows(2).enumerate() {
            s += ln(self.edge_potentials[e][instance][w[0] as usize][w[1] as usize]);
        }
        s
    }
}
