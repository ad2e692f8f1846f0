mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use storm_core::evaluation::*;

fn labels(k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    prop::collection::vec((1..=k, 1..=k), 1..60).prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn metrics_ignore_instance_order((t, p) in labels(5), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..t.len()).collect();
        idx.shuffle(&mut common::rng(seed));
        let ts: Vec<usize> = idx.iter().map(|&i| t[i]).collect();
        let ps: Vec<usize> = idx.iter().map(|&i| p[i]).collect();
        prop_assert!((macro_mae(&t, &p, 5).unwrap() - macro_mae(&ts, &ps, 5).unwrap()).abs() < 1e-12);
        prop_assert!((macro_zero_one(&t, &p, 5).unwrap() - macro_zero_one(&ts, &ps, 5).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mae_dominates_zero_one((t, p) in labels(6)) {
        let zo = macro_zero_one(&t, &p, 6).unwrap();
        let mae = macro_mae(&t, &p, 6).unwrap();
        prop_assert!(mae >= zo - 1e-12);
        prop_assert!((0.0..=1.0).contains(&zo));
        prop_assert!(mae <= 5.0);
    }

    #[test]
    fn ranks_sum_to_triangle(scores in prop::collection::vec(prop::collection::vec(0u8..5, 4), 1..12)) {
        let m = 4;
        let rows: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|&v| f64::from(v) / 4.0).collect()).collect();
        for row in &rows {
            let ranks = rank_row(row);
            prop_assert!((ranks.iter().sum::<f64>() - (m * (m + 1)) as f64 / 2.0).abs() < 1e-12);
            prop_assert!(ranks.iter().all(|&r| (1.0..=m as f64).contains(&r)));
        }
        let table = ScoreTable::new(
            "mae",
            (0..m).map(|i| format!("m{i}")).collect(),
            (0..rows.len()).map(|i| format!("d{i}")).collect(),
            rows,
        ).unwrap();
        let avg = average_ranks(&table).unwrap();
        prop_assert!((avg.iter().sum::<f64>() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn cd_groups_cover_and_nest(ranks in prop::collection::vec(1.0f64..6.0, 2..8), cd in 0.05f64..3.0) {
        let small = cd_groups(&ranks, cd, 0.05).unwrap();
        let large = cd_groups(&ranks, cd * 1.5, 0.05).unwrap();
        for g in [&small, &large] {
            let mut seen = vec![false; ranks.len()];
            for group in &g.groups {
                prop_assert!(!group.is_empty());
                for &i in group {
                    seen[i] = true;
                }
                let lo = group.iter().map(|&i| ranks[i]).fold(f64::INFINITY, f64::min);
                let hi = group.iter().map(|&i| ranks[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(hi - lo < g.critical_difference);
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
        // every group under the smaller CD sits inside some group under the larger one
        for g in &small.groups {
            prop_assert!(large.groups.iter().any(|h| g.iter().all(|i| h.contains(i))));
        }
    }

    #[test]
    fn wilcoxon_is_antisymmetric(a in prop::collection::vec(-5.0f64..5.0, 6..40), shift in -1.0f64..1.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + shift + (i as f64 * 0.37).sin()).collect();
        let ab = wilcoxon_signed_rank(&a, &b, 0.05).unwrap();
        let ba = wilcoxon_signed_rank(&b, &a, 0.05).unwrap();
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert_eq!(ab.w_plus, ba.w_minus);
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
    }
}

#[test]
fn worked_examples() {
    assert_eq!(macro_zero_one(&[1, 1, 2, 2], &[1, 2, 2, 2], 2).unwrap(), 0.25);
    assert_eq!(macro_mae(&[1, 1, 2, 2], &[1, 2, 2, 2], 2).unwrap(), 0.25);
    assert_eq!(macro_mae(&[1, 5], &[5, 1], 5).unwrap(), 4.0);
    assert!((critical_difference(4, 8, 0.01).unwrap() - 2.0095).abs() < 1e-3);
    assert_eq!(cd_groups(&[1.0, 1.1], 0.5, 0.05).unwrap().groups.len(), 1);
    assert_eq!(cd_groups(&[1.0, 2.0, 3.0, 4.0], 0.9, 0.05).unwrap().groups.len(), 4);
    let a: Vec<f64> = (0..20).map(|i| f64::from(i) * 1.3).collect();
    let b: Vec<f64> = a.iter().map(|v| v - 2.0).collect();
    let r = wilcoxon_signed_rank(&a, &b, 0.01).unwrap();
    assert!((r.p_value - 2.0 * 2f64.powi(-20)).abs() < 1e-12);
    assert!(r.significant && r.statistic == 0.0);
    let same = wilcoxon_signed_rank(&a, &a, 0.01).unwrap();
    assert_eq!(same.method, WilcoxonMethod::Degenerate);
    assert!(!same.significant);
}

#[test]
fn exact_null_up_to_25_pairs_then_normal() {
    let mut r = common::rng(77);
    for _ in 0..20 {
        let a: Vec<f64> = (0..26).map(|_| StandardNormal.sample(&mut r)).collect();
        let b: Vec<f64> = (0..26).map(|_| StandardNormal.sample(&mut r)).collect();
        let approx = wilcoxon_signed_rank(&a, &b, 0.05).unwrap();
        assert_eq!(approx.method, WilcoxonMethod::NormalApprox);
        let exact = wilcoxon_signed_rank(&a[..25], &b[..25], 0.05).unwrap();
        assert_eq!(exact.method, WilcoxonMethod::Exact);
        assert!(approx.p_value > 0.0 && exact.p_value > 0.0);
    }
}

#[test]
fn wilcoxon_is_calibrated_under_the_null() {
    let sims = 10_000;
    let alpha = 0.01;
    let mut r = common::rng(2024);
    let mut rejections = 0;
    for _ in 0..sims {
        let a: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut r)).collect();
        let b: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut r)).collect();
        rejections += usize::from(wilcoxon_signed_rank(&a, &b, alpha).unwrap().significant);
    }
    let rate = rejections as f64 / sims as f64;
    let se = (alpha * (1.0 - alpha) / sims as f64).sqrt();
    assert!((rate - alpha).abs() <= 3.0 * se, "rejection rate {rate}");
}
