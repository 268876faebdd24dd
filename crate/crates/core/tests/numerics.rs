mod common;

use common::*;
use metastable_core::verify::{exact_stationary, transient_distribution};
use metastable_core::{fixtures, ChainSpec, Hierarchy};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gth_matches_tree_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..=6 {
        for _ in 0..5 {
            let spec = random_chain(&mut rng, n);
            for eps in [0.5, 0.2] {
                let g = spec.instantiate_generator(eps).unwrap();
                let a = exact_stationary(&g).unwrap();
                let b = tree_stationary(&g.entries);
                for j in 0..n {
                    assert!((a[j] / b[j] - 1.0).abs() < 1e-10, "n {n}, eps {eps}, state {j}");
                }
            }
        }
    }
}

#[test]
fn long_time_transient_reaches_stationary() {
    let spec = fixtures::chain_d();
    let eps = 0.3;
    let g = spec.instantiate_generator(eps).unwrap();
    let pi = tree_stationary(&g.entries);
    let row = transient_distribution(&g, (12.0f64 / eps).exp(), 0).unwrap();
    for j in 0..4 {
        assert!((row[j] - pi[j]).abs() < 1e-9, "state {j}: {} vs {}", row[j], pi[j]);
    }
}

/// Rate from cluster `k` to cluster `l` at rank 1, weighting states of `k`
/// by the stationary law of the chain confined to `k`.
fn aggregated_rate(spec: &ChainSpec, h: &Hierarchy, k: usize, l: usize, eps: f64) -> f64 {
    let g = spec.instantiate_generator(eps).unwrap().entries;
    let inside = h.tree.resolve(1, k).to_vec();
    let target = h.tree.resolve(1, l);
    let m = inside.len();
    let mut local = DMatrix::zeros(m, m);
    for (a, &i) in inside.iter().enumerate() {
        for (b, &j) in inside.iter().enumerate() {
            if a != b {
                local[(a, b)] = g[(i, j)];
                local[(a, a)] -= g[(i, j)];
            }
        }
    }
    let pi = tree_stationary(&local);
    inside
        .iter()
        .zip(&pi)
        .map(|(&i, p)| p * target.iter().map(|&j| g[(i, j)]).sum::<f64>())
        .sum()
}

#[test]
fn reduced_rates_match_aggregated_numerics() {
    for spec in [fixtures::chain_d(), fixtures::tie_chain()] {
        let h = Hierarchy::build(&spec).unwrap();
        let n1 = h.cluster_counts()[1];
        for k in 0..n1 {
            for l in 0..n1 {
                if k == l {
                    continue;
                }
                let q = h.level(1).rates[(k, l)];
                let errs: Vec<f64> = [0.3, 0.15, 0.075]
                    .iter()
                    .map(|&eps| (aggregated_rate(&spec, &h, k, l, eps) / q.evaluate(eps).unwrap() - 1.0).abs())
                    .collect();
                assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{k}->{l}: {errs:?}");
                assert!(errs[2] < 1e-3, "{k}->{l}: {errs:?}");
            }
        }
    }
}

#[test]
fn nested_measures_converge_on_random_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 3..=5 {
        for _ in 0..4 {
            let spec = random_chain(&mut rng, n);
            let h = Hierarchy::build(&spec).unwrap();
            let rel = |eps: f64| {
                let pi = exact_stationary(&spec.instantiate_generator(eps).unwrap()).unwrap();
                (0..n)
                    .map(|j| (nested_measure(&h, j).evaluate(eps).unwrap() / pi[j] - 1.0).abs())
                    .fold(0.0, f64::max)
            };
            let (coarse, fine) = (rel(0.1), rel(0.05));
            assert!(fine <= coarse + 1e-12 && fine < 0.1, "{coarse} -> {fine}");
        }
    }
}
