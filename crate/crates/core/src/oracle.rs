//! Brute-force oracles for unit tests.

use nalgebra::DMatrix;

/// Stationary vector of a small irreducible generator by the Markov chain
/// tree theorem: `μ_i ∝ Σ` over spanning trees directed into `i` of the
/// product of their rates. Enumerates every choice of one outgoing edge per
/// non-root state, so only usable for a handful of states.
pub fn tree_stationary(g: &DMatrix<f64>) -> Vec<f64> {
    let n = g.nrows();
    let mut weights = vec![0.0; n];
    for root in 0..n {
        let others: Vec<usize> = (0..n).filter(|&x| x != root).collect();
        let mut choice = vec![0usize; others.len()];
        'outer: loop {
            let mut next = vec![usize::MAX; n];
            let mut w = 1.0;
            let mut valid = true;
            for (k, &x) in others.iter().enumerate() {
                let target = if choice[k] >= x { choice[k] + 1 } else { choice[k] };
                next[x] = target;
                w *= g[(x, target)];
            }
            for &x in &others {
                let mut y = x;
                for _ in 0..n {
                    if y == root {
                        break;
                    }
                    y = next[y];
                }
                if y != root {
                    valid = false;
                    break;
                }
            }
            if valid {
                weights[root] += w;
            }
            for k in 0..choice.len() {
                choice[k] += 1;
                if choice[k] < n - 1 {
                    continue 'outer;
                }
                choice[k] = 0;
            }
            break;
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

#[test]
fn tree_oracle_two_state() {
    let g = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 3.0, -3.0]);
    let mu = tree_stationary(&g);
    assert!((mu[0] - 0.75).abs() < 1e-15 && (mu[1] - 0.25).abs() < 1e-15);
}
