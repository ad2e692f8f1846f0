use crate::encoding::EncodedLabel;
use crate::error::{Result, StormError};
use crate::scalar::{log_add_exp, Scalar};

use super::{resolve_domain, Domain, InferenceMode};

/// Potentials and forward/backward messages for a single instance.
///
/// In the exp domain the potential fields hold `ψ = exp(Wx)` and `Ψ = exp(Ux)` and the
/// messages are plain products; in the log domain every field holds the logarithm of
/// the same quantity and products become sums.
#[derive(Clone, Debug)]
pub struct ChainMessages<F: Scalar> {
    domain: Domain,
    constrained: bool,
    node_potentials: Vec<[F; 2]>,
    edge_potentials: Vec<[[F; 2]; 2]>,
    forward: Vec<[F; 2]>,
    backward: Vec<[F; 2]>,
    gamma: Vec<[F; 2]>,
    delta: Vec<[F; 2]>,
    log_z: F,
    z: F,
    completed: bool,
}

// Recursion kernels shared with the batch layout.

/// Element-wise product (exp) or sum (log).
#[inline]
pub(crate) fn hadamard<F: Scalar>(domain: Domain, a: [F; 2], b: [F; 2]) -> [F; 2] {
    match domain {
        Domain::Log => [a[0] + b[0], a[1] + b[1]],
        _ => [a[0] * b[0], a[1] * b[1]],
    }
}

/// `α^(n+1) = Ψ^(n)ᵀ γ^(n)`.
#[inline]
pub(crate) fn forward_step<F: Scalar>(domain: Domain, edge: &[[F; 2]; 2], gamma: [F; 2]) -> [F; 2] {
    match domain {
        Domain::Log => [
            log_add_exp(edge[0][0] + gamma[0], edge[1][0] + gamma[1]),
            log_add_exp(edge[0][1] + gamma[0], edge[1][1] + gamma[1]),
        ],
        _ => [edge[0][0] * gamma[0] + edge[1][0] * gamma[1], edge[0][1] * gamma[0] + edge[1][1] * gamma[1]],
    }
}

/// `β^(n-1) = Ψ^(n-1) δ^(n)`.
#[inline]
pub(crate) fn backward_step<F: Scalar>(domain: Domain, edge: &[[F; 2]; 2], delta: [F; 2]) -> [F; 2] {
    match domain {
        Domain::Log => [
            log_add_exp(edge[0][0] + delta[0], edge[0][1] + delta[1]),
            log_add_exp(edge[1][0] + delta[0], edge[1][1] + delta[1]),
        ],
        _ => [edge[0][0] * delta[0] + edge[0][1] * delta[1], edge[1][0] * delta[0] + edge[1][1] * delta[1]],
    }
}

#[inline]
pub(crate) fn unit<F: Scalar>(domain: Domain) -> [F; 2] {
    match domain {
        Domain::Log => [F::zero(); 2],
        _ => [F::one(); 2],
    }
}

/// `1ᵀ(a ⊙ b)` in the active domain.
#[inline]
pub(crate) fn total<F: Scalar>(domain: Domain, a: [F; 2], b: [F; 2]) -> F {
    match domain {
        Domain::Log => log_add_exp(a[0] + b[0], a[1] + b[1]),
        _ => a[0] * b[0] + a[1] * b[1],
    }
}

/// `(log Z, Z)` from a domain value of the normaliser.
#[inline]
pub(crate) fn normaliser<F: Scalar>(domain: Domain, value: F) -> (F, F) {
    match domain {
        Domain::Log => (value, value.exp()),
        _ => (value.ln(), value),
    }
}

/// Converts a value of this domain into a probability given `log Z`.
#[inline]
pub(crate) fn normalise<F: Scalar>(domain: Domain, value: F, log_z: F, z: F) -> F {
    match domain {
        Domain::Log => (value - log_z).exp(),
        _ => value / z,
    }
}

/// Largest finite absolute score and the per-position sum of those maxima.
pub(crate) fn score_bounds<F: Scalar>(nodes: &[[F; 2]], edges: &[[[F; 2]; 2]]) -> (F, F) {
    let finite_max =
        |vals: &mut dyn Iterator<Item = &F>| vals.filter(|v| v.is_finite()).fold(F::zero(), |acc, v| acc.max(v.abs()));
    let mut max_abs = F::zero();
    let mut total = F::zero();
    for s in nodes {
        let m = finite_max(&mut s.iter());
        max_abs = max_abs.max(m);
        total += m;
    }
    for s in edges {
        let m = finite_max(&mut s.iter().flatten());
        max_abs = max_abs.max(m);
        total += m;
    }
    (max_abs, total)
}

/// Applies the transition constraint, resolves `Auto`, and converts raw scores to
/// potentials of the chosen domain in place.
pub(crate) fn potentials_from_scores<F: Scalar>(
    nodes: &mut [[F; 2]],
    edges: &mut [[[F; 2]; 2]],
    mode: InferenceMode,
    k: usize,
) -> Domain {
    if mode.constrain_transitions {
        for e in edges.iter_mut() {
            e[0][1] = F::neg_infinity();
        }
    }
    let (max_abs, total) = score_bounds(nodes, edges);
    let domain = resolve_domain(mode.domain, k, max_abs, total);
    if domain == Domain::Exp {
        for s in nodes.iter_mut().flatten() {
            *s = s.exp();
        }
        for s in edges.iter_mut().flatten().flatten() {
            *s = s.exp();
        }
    }
    domain
}

impl<F: Scalar> ChainMessages<F> {
    /// Builds potentials from node scores `W^(n)x` and edge scores `U^(e)x`.
    ///
    /// Panics if the edge count is not one less than the node count.
    pub fn from_scores(mut node_scores: Vec<[F; 2]>, mut edge_scores: Vec<[[F; 2]; 2]>, mode: InferenceMode) -> Self {
        let len = node_scores.len();
        assert!(len >= 1, "a chain needs at least one node");
        assert_eq!(edge_scores.len() + 1, len, "chain needs exactly one edge fewer than nodes");
        let domain = potentials_from_scores(&mut node_scores, &mut edge_scores, mode, len + 1);
        Self {
            domain,
            constrained: mode.constrain_transitions,
            node_potentials: node_scores,
            edge_potentials: edge_scores,
            forward: Vec::new(),
            backward: Vec::new(),
            gamma: Vec::new(),
            delta: Vec::new(),
            log_z: F::nan(),
            z: F::nan(),
            completed: false,
        }
    }

    /// Number of categories `K`.
    pub fn k(&self) -> usize {
        self.node_potentials.len() + 1
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn is_completed(&self) -> bool {
        self.completed
    }

    /// `ψ^(n)` in the active domain.
    pub fn node_potentials(&self) -> &[[F; 2]] {
        &self.node_potentials
    }

    /// `Ψ^(e)` in the active domain.
    pub fn edge_potentials(&self) -> &[[[F; 2]; 2]] {
        &self.edge_potentials
    }

    pub fn forward(&self) -> &[[F; 2]] {
        &self.forward
    }

    pub fn backward(&self) -> &[[F; 2]] {
        &self.backward
    }

    pub fn gamma(&self) -> &[[F; 2]] {
        &self.gamma
    }

    pub fn delta(&self) -> &[[F; 2]] {
        &self.delta
    }

    pub fn log_z(&self) -> F {
        self.assert_completed();
        self.log_z
    }

    fn z(&self) -> F {
        self.z
    }

    fn assert_completed(&self) {
        assert!(self.completed, "forward_backward must run before querying marginals");
    }

    pub fn forward_backward(&mut self) -> &mut Self {
        let len = self.node_potentials.len();
        let d = self.domain;
        let psi = &self.node_potentials;
        let edge = &self.edge_potentials;

        let mut alpha = Vec::with_capacity(len);
        let mut gamma = Vec::with_capacity(len);
        alpha.push(unit(d));
        for n in 0..len {
            let g = hadamard(d, alpha[n], psi[n]);
            gamma.push(g);
            if n + 1 < len {
                alpha.push(forward_step(d, &edge[n], g));
            }
        }

        let mut beta = vec![unit(d); len];
        let mut delta = vec![unit(d); len];
        for n in (0..len).rev() {
            delta[n] = hadamard(d, psi[n], beta[n]);
            if n > 0 {
                beta[n - 1] = backward_step(d, &edge[n - 1], delta[n]);
            }
        }

        (self.log_z, self.z) = normaliser(d, total(d, gamma[len - 1], beta[len - 1]));
        self.forward = alpha;
        self.backward = beta;
        self.gamma = gamma;
        self.delta = delta;
        self.completed = true;
        self
    }

    /// `log 1ᵀ(α^(n) ⊙ ψ^(n) ⊙ β^(n))`; equals `log Z` at every position.
    pub fn log_z_at(&self, node: usize) -> F {
        self.assert_completed();
        normaliser(self.domain, total(self.domain, self.gamma[node], self.backward[node])).0
    }

    /// `P(y_n = s)` for every node, as `[P(0), P(1)]` pairs.
    pub fn node_marginals(&self) -> Vec<[F; 2]> {
        self.assert_completed();
        let (lz, z) = (self.log_z, self.z());
        self.gamma
            .iter()
            .zip(&self.backward)
            .map(|(g, b)| {
                let v = hadamard(self.domain, *g, *b);
                [normalise(self.domain, v[0], lz, z), normalise(self.domain, v[1], lz, z)]
            })
            .collect()
    }

    /// `P(y_e = row, y_{e+1} = col)` for every edge.
    pub fn edge_marginals(&self) -> Vec<[[F; 2]; 2]> {
        self.assert_completed();
        let (lz, z) = (self.log_z, self.z());
        let d = self.domain;
        (0..self.edge_potentials.len())
            .map(|e| {
                let mut m = [[F::zero(); 2]; 2];
                for (i, row) in m.iter_mut().enumerate() {
                    for (j, cell) in row.iter_mut().enumerate() {
                        let v = match d {
                            Domain::Log => self.gamma[e][i] + self.edge_potentials[e][i][j] + self.delta[e + 1][j],
                            _ => self.gamma[e][i] * self.edge_potentials[e][i][j] * self.delta[e + 1][j],
                        };
                        *cell = normalise(d, v, lz, z);
                    }
                }
                m
            })
            .collect()
    }

    fn log_node(&self, n: usize, s: usize) -> F {
        match self.domain {
            Domain::Log => self.node_potentials[n][s],
            _ => self.node_potentials[n][s].ln(),
        }
    }

    fn log_edge(&self, e: usize, i: usize, j: usize) -> F {
        match self.domain {
            Domain::Log => self.edge_potentials[e][i][j],
            _ => self.edge_potentials[e][i][j].ln(),
        }
    }

    /// Unnormalised log-score of a full bit sequence.
    pub fn log_score(&self, bits: &[u8]) -> F {
        assert_eq!(bits.len(), self.node_potentials.len());
        let mut s = F::zero();
        for (n, &b) in bits.iter().enumerate() {
            s += self.log_node(n, b as usize);
        }
        for (e, w) in bits.windows(2).enumerate() {
            s += self.log_edge(e, w[0] as usize, w[1] as usize);
        }
        s
    }

    /// `log P(y = bits | x)`.
    pub fn log_prob(&self, bits: &[u8]) -> F {
        self.log_score(bits) - self.log_z()
    }

    /// Max-product decoding. Among equally scored sequences the one with a 0 at the
    /// earliest differing position wins.
    ///
    /// Works from suffix maxima so that the forward pass can break ties greedily.
    pub fn viterbi(&self) -> EncodedLabel {
        let len = self.node_potentials.len();
        // suffix[n][s]: best log-score of nodes n.. given y_n = s.
        let mut suffix = vec![[F::zero(); 2]; len];
        for s in 0..2 {
            suffix[len - 1][s] = self.log_node(len - 1, s);
        }
        for n in (0..len - 1).rev() {
            for s in 0..2 {
                let best_next =
                    (0..2).map(|t| self.log_edge(n, s, t) + suffix[n + 1][t]).fold(F::neg_infinity(), F::max);
                suffix[n][s] = self.log_node(n, s) + best_next;
            }
        }

        let mut bits = Vec::with_capacity(len);
        let first = u8::from(suffix[0][1] > suffix[0][0]);
        bits.push(first);
        for n in 1..len {
            let prev = bits[n - 1] as usize;
            let v0 = self.log_edge(n - 1, prev, 0) + suffix[n][0];
            let v1 = self.log_edge(n - 1, prev, 1) + suffix[n][1];
            bits.push(u8::from(v1 > v0));
        }
        EncodedLabel::from_bits(&bits).expect("viterbi emits binary bits")
    }

    /// `P(label = k)` for `k = 1..=K`. Only meaningful when invalid codes carry no mass.
    ///
    /// Uses `P(y_{k-1} = 1, y_k = 0)` on interior labels, which is exactly
    /// `P(y_{k-1} = 1) - P(y_k = 1)` under constrained transitions.
    pub fn label_distribution(&self) -> Result<Vec<F>> {
        if !self.constrained {
            return Err(StormError::UnconstrainedMode);
        }
        let nodes = self.node_marginals();
        let edges = self.edge_marginals();
        let len = nodes.len();
        let mut dist = Vec::with_capacity(len + 1);
        dist.push(nodes[0][0]);
        for e in &edges {
            dist.push(e[1][0]);
        }
        dist.push(nodes[len - 1][1]);
        Ok(dist)
    }

    /// `P(a <= label <= b)`.
    pub fn interval_query(&self, a: usize, b: usize) -> Result<F> {
        let k = self.k();
        if a < 1 || b > k || a > b {
            return Err(StormError::arg(format!("interval [{a}, {b}] is not within 1..={k}")));
        }
        let dist = self.label_distribution()?;
        Ok(dist[a - 1..b].iter().copied().sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msgs(nodes: Vec<[f64; 2]>, edges: Vec<[[f64; 2]; 2]>, mode: InferenceMode) -> ChainMessages<f64> {
        let mut m = ChainMessages::from_scores(nodes, edges, mode);
        m.forward_backward();
        m
    }

    /// Every binary sequence of length `len` with its exp-domain weight.
    fn enumerate(m: &ChainMessages<f64>) -> Vec<(Vec<u8>, f64)> {
        let len = m.k() - 1;
        (0..1usize << len)
            .map(|mask| {
                let bits: Vec<u8> = (0..len).map(|i| ((mask >> (len - 1 - i)) & 1) as u8).collect();
                let w = m.log_score(&bits).exp();
                (bits, w)
            })
            .collect()
    }

    #[test]
    fn single_node_chain() {
        let m = msgs(vec![[0.0, 3f64.ln()]], vec![], InferenceMode::unconstrained());
        assert!((m.log_z().exp() - 4.0).abs() < 1e-12);
        assert_eq!(m.forward()[0], [1.0, 1.0]);
        assert_eq!(m.backward()[0], [1.0, 1.0]);
        let p = m.node_marginals();
        assert!((p[0][0] - 0.25).abs() < 1e-15 && (p[0][1] - 0.75).abs() < 1e-15);
        assert_eq!(m.viterbi().bits(), &[1]);
    }

    #[test]
    fn uniform_chain() {
        let m = msgs(vec![[0.0; 2]; 3], vec![[[0.0; 2]; 2]; 2], InferenceMode::unconstrained());
        assert!((m.log_z().exp() - 8.0).abs() < 1e-12);
        for p in m.node_marginals() {
            assert_eq!(p, [0.5, 0.5]);
        }
        for e in m.edge_marginals() {
            for v in e.iter().flatten() {
                assert!((v - 0.25).abs() < 1e-15);
            }
        }
        assert_eq!(m.viterbi().bits(), &[0, 0, 0]);
    }

    #[test]
    fn constrained_potentials_zero_forbidden_cell() {
        let mode = InferenceMode::constrained().with_domain(Domain::Exp);
        let m = ChainMessages::<f64>::from_scores(vec![[0.0; 2]; 3], vec![[[0.0; 2]; 2]; 2], mode);
        for e in m.edge_potentials() {
            assert_eq!(*e, [[1.0, 0.0], [1.0, 1.0]]);
        }
        let m =
            ChainMessages::<f64>::from_scores(vec![[0.0; 2]; 2], vec![[[0.0; 2]; 2]], mode.with_domain(Domain::Log));
        assert_eq!(m.edge_potentials()[0][0][1], f64::NEG_INFINITY);
    }

    #[test]
    fn uniform_constrained_label_distribution() {
        for domain in [Domain::Exp, Domain::Log] {
            let mode = InferenceMode::constrained().with_domain(domain);
            let m = msgs(vec![[0.0; 2]; 2], vec![[[0.0; 2]; 2]], mode);
            let dist = m.label_distribution().unwrap();
            for p in &dist {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
            assert!((m.interval_query(1, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
            assert!((m.interval_query(1, 3).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(m.edge_marginals()[0][0][1], 0.0);
        }
    }

    #[test]
    fn label_distribution_needs_constraints() {
        let m = msgs(vec![[0.0, 3f64.ln()]], vec![], InferenceMode::unconstrained());
        assert!(matches!(m.label_distribution(), Err(StormError::UnconstrainedMode)));
        let m = msgs(vec![[0.0, 3f64.ln()]], vec![], InferenceMode::constrained());
        let d = m.label_distribution().unwrap();
        assert!((d[0] - 0.25).abs() < 1e-15 && (d[1] - 0.75).abs() < 1e-15);
        assert!(m.interval_query(2, 1).is_err());
        assert!(m.interval_query(0, 1).is_err());
        assert!(m.interval_query(1, 3).is_err());
    }

    #[test]
    fn small_chain_matches_enumeration_in_both_domains() {
        let nodes = vec![[0.3, -1.2], [0.7, 0.1], [-0.4, 0.9], [1.5, -0.2]];
        let edges = vec![[[0.2, -0.5], [1.1, 0.0]], [[-0.3, 0.8], [0.4, -1.0]], [[0.6, 0.2], [-0.7, 0.5]]];
        for domain in [Domain::Exp, Domain::Log] {
            let mode = InferenceMode::unconstrained().with_domain(domain);
            let m = msgs(nodes.clone(), edges.clone(), mode);
            let all = enumerate(&m);
            let z: f64 = all.iter().map(|(_, w)| w).sum();
            assert!((m.log_z().exp() - z).abs() / z < 1e-12);
            for n in 0..4 {
                assert!((m.log_z_at(n) - m.log_z()).abs() < 1e-12);
            }
            let nm = m.node_marginals();
            for n in 0..4 {
                let p1: f64 = all.iter().filter(|(b, _)| b[n] == 1).map(|(_, w)| w).sum::<f64>() / z;
                assert!((nm[n][1] - p1).abs() < 1e-12);
            }
            let best = all.iter().fold(&all[0], |acc, c| if c.1 > acc.1 { c } else { acc });
            assert_eq!(m.viterbi().bits(), &best.0[..]);
        }
    }
}
