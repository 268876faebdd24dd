//! Workload generators shared by the benchmarks.

use metastable_core::ChainSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random chain on `n` states: a ring guarantees irreducibility, extra edges
/// are added with probability 1/2. Exponents are drawn from a small integer
/// grid so the hierarchy has several ranks.
pub fn random_chain(n: usize, seed: u64) -> ChainSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if j == (i + 1) % n || rng.gen_bool(0.5) {
                let alpha = rng.gen_range(0.5..2.0);
                let gamma = rng.gen_range(0..12) as f64 * 0.5 + rng.gen_range(0.0..0.01);
                triples.push((i, j, alpha, 0.0, gamma));
            }
        }
    }
    ChainSpec::from_triples(n, &triples).expect("valid random chain")
}
