//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storm_core::chain_crf::ChainCrfParams;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_params(rng: &mut ChaCha8Rng, k: usize, dim: usize, scale: f64) -> ChainCrfParams<f64> {
    let n = ChainCrfParams::<f64>::len_for(k, dim);
    let w = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    ChainCrfParams::from_flat(k, dim, w).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Everything inference should produce, computed by listing all `2^{K-1}` bit strings.
pub struct Enumerated {
    pub z: f64,
    pub node: Vec<[f64; 2]>,
    pub edge: Vec<[[f64; 2]; 2]>,
    pub best: Vec<u8>,
    /// `P(label = k)`, `k = 1..=K`, from the valid codes only.
    pub labels: Vec<f64>,
    pub sequences: Vec<(Vec<u8>, f64)>,
}

pub fn is_valid(bits: &[u8]) -> bool {
    bits.windows(2).all(|w| w[0] >= w[1])
}

/// Unnormalised log-score of `bits` straight from the weights.
pub fn log_score(p: &ChainCrfParams<f64>, x: &[f64], bits: &[u8]) -> f64 {
    let mut s = 0.0;
    for (n, &b) in bits.iter().enumerate() {
        s += dot(p.node(n, b as usize), x);
    }
    for (e, w) in bits.windows(2).enumerate() {
        s += dot(p.edge(e, w[0] as usize, w[1] as usize), x);
    }
    s
}

pub fn enumerate(p: &ChainCrfParams<f64>, x: &[f64], constrained: bool) -> Enumerated {
    let len = p.k() - 1;
    let mut sequences = Vec::new();
    for code in 0..1usize << len {
        // bit 0 of the sequence is the most significant, so numeric order is lexicographic
        let bits: Vec<u8> = (0..len).map(|i| ((code >> (len - 1 - i)) & 1) as u8).collect();
        if constrained && !is_valid(&bits) {
            continue;
        }
        let s = log_score(p, x, &bits);
        sequences.push((bits, s));
    }
    let max = sequences.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let z_scaled: f64 = sequences.iter().map(|s| (s.1 - max).exp()).sum();
    let z = z_scaled * max.exp();
    let mut node = vec![[0.0; 2]; len];
    let mut edge = vec![[[0.0; 2]; 2]; len.saturating_sub(1)];
    let mut labels = vec![0.0; len + 1];
    let mut best = sequences[0].clone();
    for (bits, s) in &sequences {
        let prob = (s - max).exp() / z_scaled;
        for (n, &b) in bits.iter().enumerate() {
            node[n][b as usize] += prob;
        }
        for (e, w) in bits.windows(2).enumerate() {
            edge[e][w[0] as usize][w[1] as usize] += prob;
        }
        if is_valid(bits) {
            let y = 1 + bits.iter().filter(|&&b| b == 1).count();
            labels[y - 1] += prob;
        }
        // strict: the lexicographically smallest maximiser wins ties
        if *s > best.1 {
            best = (bits.clone(), *s);
        }
    }
    Enumerated { z, node, edge, best: best.0, labels, sequences }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Central differences of `f` at `x`.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let up = f(&xp);
            xp[i] = orig - h;
            let down = f(&xp);
            xp[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Nearest valid code by exhaustive search: minimum Hamming distance, ties to the
/// smaller label.
pub fn nearest_valid_bruteforce(bits: &[u8]) -> usize {
    let len = bits.len();
    (1..=len + 1)
        .map(|y| {
            let dist = (0..len).filter(|&i| bits[i] != u8::from(i + 1 < y)).count();
            (dist, y)
        })
        .min()
        .unwrap()
        .1
}
