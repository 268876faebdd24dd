//! Small reference chains used by tests, benches and the README.

use crate::chain::ChainSpec;

/// Two states: `q12 = e^(−1/ε)`, `q21 = e^(−2/ε)`.
pub fn chain_a() -> ChainSpec {
    ChainSpec::from_triples(2, &[(0, 1, 1.0, 0.0, 1.0), (1, 0, 1.0, 0.0, 2.0)]).expect("valid")
}

/// Three states; state 1 splits 1:2 between two deep traps.
pub fn chain_b() -> ChainSpec {
    ChainSpec::from_triples(
        3,
        &[
            (0, 1, 1.0, 0.0, 1.0),
            (0, 2, 2.0, 0.0, 1.0),
            (1, 0, 1.0, 0.0, 4.0),
            (1, 2, 1.0, 0.0, 5.0),
            (2, 0, 1.0, 0.0, 4.0),
            (2, 1, 1.0, 0.0, 5.0),
        ],
    )
    .expect("valid")
}

/// Three states with a fast pair {1,2} and a transient state 3 that exits
/// to either with equal weight.
pub fn tie_chain() -> ChainSpec {
    ChainSpec::from_triples(
        3,
        &[
            (0, 1, 1.0, 0.0, 1.0),
            (1, 0, 1.0, 0.0, 1.0),
            (0, 2, 1.0, 0.0, 3.0),
            (1, 2, 1.0, 0.0, 3.0),
            (2, 0, 1.0, 0.0, 2.0),
            (2, 1, 1.0, 0.0, 2.0),
        ],
    )
    .expect("valid")
}

/// Four states in two fast pairs {1,2} and {3,4}; the pairs communicate
/// through `q23 = e^(−6/ε)` and `q32 = e^(−8/ε)`, every other cross rate is
/// `e^(−9/ε)`.
pub fn chain_d() -> ChainSpec {
    let mut e = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            let gamma = match (i, j) {
                (0, 1) | (1, 0) | (2, 3) | (3, 2) => 1.0,
                (1, 2) => 6.0,
                (2, 1) => 8.0,
                _ => 9.0,
            };
            e.push((i, j, 1.0, 0.0, gamma));
        }
    }
    ChainSpec::from_triples(4, &e).expect("valid")
}
