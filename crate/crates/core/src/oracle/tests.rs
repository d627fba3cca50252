use std::collections::BTreeMap;

use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::graph::{sample_graph, EnsembleParams};
use crate::model::{builtin_model, sample_world};

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Two fair bits pooled in one noiseless OR test.
fn or_pair() -> (FactorGraph, ObservationModel) {
    let g = FactorGraph::from_edges(2, 1, [(0, 0), (1, 0)]).unwrap();
    let m = builtin_model("group_testing", &params(&[("p1", 0.5), ("f", 0.0)])).unwrap();
    (g, m)
}

fn world(x: &[usize], y: &[usize], reveal: &[Option<usize>]) -> World {
    World { x: x.to_vec(), y: y.to_vec(), z: vec![0; x.len()], reveal: reveal.to_vec() }
}

/// Pair law of the OR pair given y = 1, enumerated by hand: the all-zero
/// configuration is excluded and the other three are equally likely.
fn or_pair_law() -> [[f64; 2]; 2] {
    let weights = [[0.0, 0.25], [0.25, 0.25]];
    let total: f64 = weights.iter().flatten().sum();
    weights.map(|row| row.map(|w| w / total))
}

#[test]
fn isolated_node_posterior_is_prior() {
    let g = FactorGraph::empty(1, 0);
    let m = builtin_model("group_testing", &params(&[("p1", 0.3)])).unwrap();
    let t = posterior_joint(&g, &m, &world(&[1], &[], &[None]), &[0]).unwrap();
    assert_relative_eq!(t.probs[0], 0.7, epsilon = 1e-15);
    assert_relative_eq!(t.probs[1], 0.3, epsilon = 1e-15);
}

#[test]
fn revealed_node_is_point_mass() {
    let (g, m) = or_pair();
    let post = Posterior::compute(&g, &m, &world(&[1, 0], &[1], &[Some(1), None])).unwrap();
    assert_eq!(post.marginal(0).probs(), &[0.0, 1.0]);
}

#[test]
fn or_pair_posterior() {
    let (g, m) = or_pair();
    let w = world(&[1, 0], &[1], &[None, None]);
    let law = or_pair_law();
    let p1 = law[1][0] + law[1][1];
    assert_relative_eq!(p1, 2.0 / 3.0, epsilon = 1e-15);
    let t = posterior_joint(&g, &m, &w, &[0]).unwrap();
    assert_relative_eq!(t.probs[1], p1, epsilon = 1e-12);
    let pair = posterior_joint(&g, &m, &w, &[0, 1]).unwrap();
    for a in 0..2 {
        for b in 0..2 {
            assert_relative_eq!(pair.probs[a * 2 + b], law[a][b], epsilon = 1e-12);
        }
    }
}

#[test]
fn or_pair_factorization_gap() {
    let (g, m) = or_pair();
    let w = world(&[1, 0], &[1], &[None, None]);
    let law = or_pair_law();
    let p = [law[0][0] + law[0][1], law[1][0] + law[1][1]];
    let expected: f64 = 0.5 * (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| (law[a][b] - p[a] * p[b]).abs()).sum::<f64>();
    assert_relative_eq!(expected, 2.0 / 9.0, epsilon = 1e-15);
    assert_relative_eq!(factorization_gap(&g, &m, &w, &[0, 1]).unwrap(), expected, epsilon = 1e-12);
    assert_eq!(factorization_gap(&g, &m, &w, &[1]).unwrap(), 0.0);
}

#[test]
fn or_pair_mutual_information() {
    let (g, m) = or_pair();
    let w = world(&[1, 0], &[1], &[None, None]);
    let law = or_pair_law();
    let p = [law[0][0] + law[0][1], law[1][0] + law[1][1]];
    let mut expected = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            if law[a][b] > 0.0 {
                expected += law[a][b] * (law[a][b] / (p[a] * p[b])).ln();
            }
        }
    }
    assert_relative_eq!(conditional_mi(&g, &m, &w, 0, 1).unwrap(), expected, epsilon = 1e-12);
    let revealed = world(&[1, 0], &[1], &[Some(1), None]);
    assert!(conditional_mi(&g, &m, &revealed, 0, 1).unwrap().abs() < 1e-12);
}

#[test]
fn or_pair_overlap_variance() {
    let (g, m) = or_pair();
    let w = world(&[1, 0], &[1], &[None, None]);
    let law = or_pair_law();
    let p1 = law[1][0] + law[1][1];
    let cov_diag = p1 - p1 * p1;
    let cov_off = law[1][1] - p1 * p1;
    let expected = (2.0 * cov_diag * cov_diag + 2.0 * cov_off * cov_off) / 4.0;
    assert_relative_eq!(expected, 5.0 / 162.0, epsilon = 1e-15);
    assert_relative_eq!(overlap_variance(&g, &m, &w, 1).unwrap(), expected, epsilon = 1e-12);
}

#[test]
fn disconnected_nodes_factorize() {
    let g = FactorGraph::from_edges(4, 2, [(0, 0), (1, 0), (2, 1), (3, 1)]).unwrap();
    let m = builtin_model("group_testing", &params(&[("f", 0.1), ("r", 0.2)])).unwrap();
    for seed in 0..20 {
        let w = sample_world(&g, &m, seed).unwrap();
        assert!(factorization_gap(&g, &m, &w, &[0, 2]).unwrap() < 1e-12);
        assert!(conditional_mi(&g, &m, &w, 1, 3).unwrap().abs() < 1e-12);
    }
    let empty = FactorGraph::empty(3, 1);
    let m = builtin_model("group_testing", &params(&[("p1", 0.3), ("theta", 0.4)])).unwrap();
    let w = sample_world(&empty, &m, 1).unwrap();
    // only the diagonal survives: each free node contributes (p - p^2)^2
    let free = w.reveal.iter().filter(|r| r.is_none()).count() as f64;
    let p = m.prior().probs()[1];
    let expected = free * (p - p * p).powi(2) / 9.0;
    assert_relative_eq!(overlap_variance(&empty, &m, &w, 1).unwrap(), expected, epsilon = 1e-15);
}

#[test]
fn fully_revealed_overlap_vanishes() {
    let g = sample_graph(&EnsembleParams::new(8, 0.5, 2.0).unwrap(), 3).unwrap();
    let m = builtin_model("group_testing", &params(&[("f", 0.05), ("theta", 1.0)])).unwrap();
    let w = sample_world(&g, &m, 4).unwrap();
    assert_eq!(overlap_variance(&g, &m, &w, 1).unwrap(), 0.0);
}

#[test]
fn impossible_world_is_distinct_error() {
    let (g, m) = or_pair();
    let w = world(&[0, 0], &[1], &[Some(0), Some(0)]);
    assert!(matches!(Posterior::compute(&g, &m, &w), Err(Error::ImpossibleWorld)));
}

#[test]
fn infeasible_size_rejected() {
    let g = FactorGraph::empty(27, 1);
    let m = builtin_model("group_testing", &params(&[])).unwrap();
    let w = World { x: vec![0; 27], y: vec![0], z: vec![0; 27], reveal: vec![None; 27] };
    assert!(matches!(Posterior::compute(&g, &m, &w), Err(Error::Infeasible { .. })));
}

#[test]
fn tv_examples() {
    assert_eq!(tv(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
    assert_eq!(tv(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
    assert_relative_eq!(tv(&[0.5, 0.5], &[0.75, 0.25]).unwrap(), 0.25);
    assert!(matches!(tv(&[1.0], &[0.5, 0.5]), Err(Error::SizeMismatch(1, 2))));
}

#[test]
fn entropy_trivial_cases() {
    let g = FactorGraph::empty(3, 1);
    let m = builtin_model("group_testing", &params(&[("p1", 0.2)])).unwrap();
    let (h, se) = conditional_entropy_mc(&g, &m, 0.0, 10, 1).unwrap();
    assert_relative_eq!(h, 3.0 * m.prior().entropy(), epsilon = 1e-12);
    assert!(se < 1e-12);
    let (h, _) = conditional_entropy_mc(&g, &m, 1.0, 10, 1).unwrap();
    assert_eq!(h, 0.0);
    assert!(conditional_entropy_mc(&g, &m, 0.0, 1, 1).is_err());
}

#[test]
fn or_pair_conditional_entropy() {
    // y = 0 pins both bits; y = 1 (prob 3/4) leaves three equally likely pairs
    let (g, m) = or_pair();
    let expected = 0.75 * 3f64.ln();
    let (h, se) = conditional_entropy_mc(&g, &m, 0.0, 20_000, 5).unwrap();
    assert!((h - expected).abs() <= 3.0 * se, "{h} vs {expected} (se {se})");
}

#[test]
fn mutual_information_sum_matches_pairwise() {
    let g = sample_graph(&EnsembleParams::new(6, 0.5, 2.0).unwrap(), 8).unwrap();
    let m = builtin_model("group_testing", &params(&[("f", 0.05), ("p1", 0.3)])).unwrap();
    let w = sample_world(&g, &m, 2).unwrap();
    let post = Posterior::compute(&g, &m, &w).unwrap();
    let direct: f64 = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| pair_mutual_information(&post, i, j)).sum();
    assert_relative_eq!(mutual_information_sum(&post), direct, epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn marginalization_is_consistent(seed in 0u64..5000) {
        let g = sample_graph(&EnsembleParams::new(7, 0.6, 2.0).unwrap(), seed).unwrap();
        let m = builtin_model("parity_bsc", &params(&[("p", 0.15), ("r", 0.3), ("theta", 0.2)])).unwrap();
        let w = sample_world(&g, &m, seed + 1).unwrap();
        let post = Posterior::compute(&g, &m, &w).unwrap();
        prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let all: Vec<usize> = (0..7).collect();
        let full = post.joint(&all).unwrap();
        for i in 0..7 {
            let direct = posterior_joint(&g, &m, &w, &[i]).unwrap();
            prop_assert!(full.marginal(i).tv(&direct.marginal(0)) < 1e-12);
        }
    }

    #[test]
    fn pinsker_direction_and_overlap_sign(seed in 0u64..5000) {
        let g = sample_graph(&EnsembleParams::new(6, 0.5, 2.5).unwrap(), seed).unwrap();
        let m = builtin_model("group_testing", &params(&[("f", 0.05), ("p1", 0.3), ("theta", 0.1)])).unwrap();
        let w = sample_world(&g, &m, seed).unwrap();
        let post = Posterior::compute(&g, &m, &w).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i == j { continue; }
                let t = post.joint(&[i, j]).unwrap();
                let prod = t.product_of_marginals();
                let l2: f64 = t.probs.iter().zip(&prod).map(|(a, b)| (a - b) * (a - b)).sum();
                let kl = kl_divergence(&t.probs, &prod);
                prop_assert!(l2 <= 2.0 * kl + 1e-12, "l2 {l2} kl {kl}");
            }
        }
        prop_assert!(overlap_variance_of(&post, 1) >= 0.0);
    }
}
