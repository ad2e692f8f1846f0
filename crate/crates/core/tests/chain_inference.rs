mod common;

use common::*;
use proptest::prelude::*;
use storm_core::chain_crf::{resolve_domain, BatchMessages, ChainCrfParams, DesignRows, Domain, InferenceMode};

fn params_from(k: usize, dim: usize, seed: u64, scale: f64) -> (ChainCrfParams<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let p = random_params(&mut r, k, dim, scale);
    let x = random_vec(&mut r, dim, 1.0);
    (p, x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_and_log_domains_agree(k in 2usize..12, dim in 1usize..5, seed in any::<u64>(), constrained in any::<bool>()) {
        let (p, x) = params_from(k, dim, seed, 2.0);
        let mode = InferenceMode { domain: Domain::Exp, constrain_transitions: constrained };
        let e = p.infer(&x, mode).unwrap();
        let l = p.infer(&x, mode.with_domain(Domain::Log)).unwrap();
        prop_assert!(rel_close(e.log_z(), l.log_z(), 1e-10));
        for (a, b) in e.node_marginals().iter().zip(l.node_marginals()) {
            prop_assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10);
        }
        prop_assert_eq!(e.viterbi(), l.viterbi());
    }

    #[test]
    fn marginals_are_distributions(k in 2usize..15, dim in 1usize..4, seed in any::<u64>()) {
        let (p, x) = params_from(k, dim, seed, 3.0);
        let m = p.infer(&x, InferenceMode::constrained()).unwrap();
        for n in m.node_marginals() {
            prop_assert!((n[0] + n[1] - 1.0).abs() < 1e-12);
        }
        for e in m.edge_marginals() {
            let s: f64 = e.iter().flatten().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert_eq!(e[0][1], 0.0);
        }
        let d = m.label_distribution().unwrap();
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(d.iter().all(|&v| v >= 0.0));
        // the constrained Viterbi path is always a valid code
        prop_assert!(m.viterbi().is_valid());
    }

    #[test]
    fn f32_tracks_f64(k in 2usize..8, dim in 1usize..4, seed in any::<u64>()) {
        let (p, x) = params_from(k, dim, seed, 1.0);
        let p32 = p.cast::<f32>();
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let a = p.infer(&x, InferenceMode::constrained()).unwrap().label_distribution().unwrap();
        let b = p32.infer(&x32, InferenceMode::constrained()).unwrap().label_distribution().unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - *v as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn batch_matches_single_instances(k in 2usize..8, dim in 1usize..4, seed in any::<u64>(), constrained in any::<bool>()) {
        let mut r = rng(seed);
        let p = random_params(&mut r, k, dim, 1.5);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| random_vec(&mut r, dim, 1.0)).collect();
        let design = DesignRows::from_rows(&rows).unwrap();
        let mode = InferenceMode { domain: Domain::Log, constrain_transitions: constrained };
        let batch = BatchMessages::compute(&p, &design, mode).unwrap();
        for (j, x) in rows.iter().enumerate() {
            let single = p.infer(x, mode).unwrap();
            prop_assert!(rel_close(batch.log_z()[j], single.log_z(), 1e-12));
            for (n, m) in single.node_marginals().iter().enumerate() {
                let b = batch.node_marginal(n, j);
                prop_assert!((b[1] - m[1]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn large_scores_stay_finite_in_log_domain() {
    let (p, x) = params_from(12, 3, 5, 400.0);
    let m = p.infer(&x, InferenceMode::constrained()).unwrap();
    assert_eq!(m.domain(), Domain::Log);
    assert!(m.log_z().is_finite());
    let d = m.label_distribution().unwrap();
    assert!(d.iter().all(|v| v.is_finite()));
    assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn auto_domain_rules() {
    assert_eq!(resolve_domain::<f64>(Domain::Auto, 5, 10.0, 40.0), Domain::Exp);
    assert_eq!(resolve_domain::<f64>(Domain::Auto, 30, 1.0, 1.0), Domain::Log);
    assert_eq!(resolve_domain::<f64>(Domain::Auto, 5, 250.0, 250.0), Domain::Log);
    // f32 cannot hold e^100
    assert_eq!(resolve_domain::<f32>(Domain::Auto, 5, 100.0, 100.0), Domain::Log);
    assert_eq!(resolve_domain::<f64>(Domain::Log, 3, 0.0, 0.0), Domain::Log);
}

#[test]
fn zero_weights_give_uniform_codes() {
    let p = ChainCrfParams::<f64>::zeros(4, 3).unwrap();
    let x = [0.3, -1.0, 1.0];
    let u = p.infer(&x, InferenceMode::unconstrained()).unwrap();
    assert!((u.log_z() - 8f64.ln()).abs() < 1e-12);
    assert_eq!(u.viterbi().bits(), &[0, 0, 0]);
    let c = p.infer(&x, InferenceMode::constrained()).unwrap();
    assert!(c.label_distribution().unwrap().iter().all(|v| (v - 0.25).abs() < 1e-12));
    assert!((c.interval_query(1, 4).unwrap() - 1.0).abs() < 1e-12);
    assert!(c.interval_query(3, 2).is_err());
    assert!(c.interval_query(0, 2).is_err());
}

#[test]
fn dimension_and_finiteness_checks() {
    let p = ChainCrfParams::<f64>::zeros(3, 2).unwrap();
    assert!(p.infer(&[1.0], InferenceMode::constrained()).is_err());
    assert!(p.infer(&[1.0, f64::NAN], InferenceMode::constrained()).is_err());
    assert!(ChainCrfParams::<f64>::from_flat(3, 2, vec![0.0; 3]).is_err());
    assert!(ChainCrfParams::<f64>::zeros(1, 2).is_err());
}
