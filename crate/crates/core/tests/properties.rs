mod common;

use common::*;
use metastable_core::ChainSpec;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn order_algebra_laws(x in order_strategy(), y in order_strategy(), z in order_strategy()) {
        check_algebra(x, y, z)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn cluster_tree_partitions(spec in chain_strategy(2..=8)) {
        check_tree(&spec)?;
    }

    #[test]
    fn nu_rows_are_stochastic(spec in chain_strategy(2..=6)) {
        check_stochastic(&spec)?;
    }

    #[test]
    fn short_time_limit_is_identity(spec in chain_strategy(2..=6)) {
        check_short_time(&spec)?;
    }

    #[test]
    fn long_time_limit_is_stationary(spec in chain_strategy(2..=6)) {
        check_long_time(&spec)?;
    }

    #[test]
    fn nu_ignores_time_coefficient(spec in chain_strategy(2..=6), c in 0.01f64..100.0) {
        check_scale_invariance(&spec, c)?;
    }

    #[test]
    fn chain_json_round_trip(spec in chain_strategy(1..=6)) {
        let text = spec.to_json();
        let back = ChainSpec::from_json(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn repair_is_idempotent(
        spec in chain_strategy(2..=6),
        mask in prop::collection::vec(any::<bool>(), 36),
    ) {
        let n = spec.len();
        let mut triples = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && mask[i * 6 + j] {
                    let f = spec.rate(i, j).fields().unwrap();
                    triples.push((i, j, f.alpha, f.beta, f.gamma));
                }
            }
        }
        let sparse = ChainSpec::from_triples(n, &triples).unwrap();
        let once = sparse.repair_zero_rates();
        prop_assert!(once.zero_rates().is_empty());
        prop_assert_eq!(once.repair_zero_rates(), once.clone());
        for &(i, j, ..) in &triples {
            prop_assert_eq!(once.rate(i, j), sparse.rate(i, j));
        }
    }
}
