#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use metastable_core::metastable::metastable_all;
use metastable_core::verify::exact_stationary;
use metastable_core::{AsymptoticOrder, ChainSpec, Hierarchy, TimeScale};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::Rng;

pub const ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];

/// `γ ∈ {0.5, 1, …, 3}` from `k ∈ 1..=6`.
pub fn grid_gamma(k: u32) -> f64 {
    0.5 * k as f64
}

/// Complete chain on `n` states from per-edge draws `(alpha index, gamma
/// step)` in row-major order.
pub fn chain_from_draws(n: usize, draws: &[(usize, u32)]) -> ChainSpec {
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let (a, g) = draws[i * n + j];
                triples.push((i, j, ALPHAS[a % 3], 0.0, grid_gamma(g)));
            }
        }
    }
    ChainSpec::from_triples(n, &triples).unwrap()
}

pub fn random_chain<R: Rng>(rng: &mut R, n: usize) -> ChainSpec {
    let draws: Vec<(usize, u32)> = (0..n * n)
        .map(|_| (rng.gen_range(0..3), rng.gen_range(1..=6)))
        .collect();
    chain_from_draws(n, &draws)
}

pub fn chain_strategy(sizes: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = ChainSpec> {
    sizes.prop_flat_map(|n| {
        prop::collection::vec((0..3usize, 1..=6u32), n * n).prop_map(move |d| chain_from_draws(n, &d))
    })
}

/// Distinct exponents λ of every finite `T^r(k, ε) = a·e^(λ/ε)`.
pub fn inverse_rate_exponents(h: &Hierarchy) -> Vec<f64> {
    let mut v: Vec<f64> = h
        .levels
        .iter()
        .filter_map(|lv| lv.inverse_rates.as_ref())
        .flatten()
        .map(|t| {
            assert_eq!(t.beta(), Some(0.0));
            -t.gamma().unwrap()
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Exponents strictly between, below and above the `T` exponents; none of
/// them is commensurate with any `T^r(k, ε)`.
pub fn admissible_exponents(h: &Hierarchy) -> Vec<f64> {
    let v = inverse_rate_exponents(h);
    let mut out = vec![v[0] - 0.25];
    out.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(v[v.len() - 1] + 0.25);
    out
}

/// Stationary law by the Markov chain tree theorem: `π_j ∝` total weight of
/// spanning arborescences rooted at `j`.
pub fn tree_stationary(g: &DMatrix<f64>) -> Vec<f64> {
    let n = g.nrows();
    let mut next = vec![0usize; n];
    let w: Vec<f64> = (0..n).map(|root| arborescences(g, root, 0, &mut next)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn arborescences(g: &DMatrix<f64>, root: usize, i: usize, next: &mut [usize]) -> f64 {
    let n = g.nrows();
    if i == n {
        for start in 0..n {
            let mut v = start;
            let mut steps = 0;
            while v != root {
                v = next[v];
                steps += 1;
                if steps > n {
                    return 0.0;
                }
            }
        }
        return (0..n).filter(|&v| v != root).map(|v| g[(v, next[v])]).product();
    }
    if i == root {
        return arborescences(g, root, i + 1, next);
    }
    let mut total = 0.0;
    for j in 0..n {
        if j != i && g[(i, j)] > 0.0 {
            next[i] = j;
            total += arborescences(g, root, i + 1, next);
        }
    }
    total
}

/// `μ^{0,ρ}(j)`: the product of cluster measure orders along the nesting chain.
pub fn nested_measure(h: &Hierarchy, j: usize) -> AsymptoticOrder {
    (0..h.top_rank())
        .map(|r| h.level(r).measures[h.tree.cluster_of(r, j)].order)
        .fold(AsymptoticOrder::ONE, |acc, m| acc * m)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn order_close(x: &AsymptoticOrder, y: &AsymptoticOrder) -> bool {
    match (x.fields(), y.fields()) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            close(a.alpha, b.alpha, 1e-12) && close(a.beta, b.beta, 1e-12) && close(a.gamma, b.gamma, 1e-12)
        }
        _ => false,
    }
}

pub fn order_strategy() -> impl Strategy<Value = AsymptoticOrder> {
    prop_oneof![
        1 => Just(AsymptoticOrder::Zero),
        9 => (0.1f64..10.0, -2i32..=2, -6i32..=6).prop_map(|(a, b, g)| {
            AsymptoticOrder::new(a, b as f64, 0.5 * g as f64).unwrap()
        }),
    ]
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(TestCaseError::fail(format!($($msg)+)));
        }
    };
}

pub fn check_algebra(x: AsymptoticOrder, y: AsymptoticOrder, z: AsymptoticOrder) -> Result<(), TestCaseError> {
    let one = AsymptoticOrder::ONE;
    let zero = AsymptoticOrder::Zero;
    ensure!(order_close(&(x + y), &(y + x)), "+ commutes: {x} {y}");
    ensure!(order_close(&(x * y), &(y * x)), "* commutes: {x} {y}");
    ensure!(order_close(&((x + y) + z), &(x + (y + z))), "+ associates: {x} {y} {z}");
    ensure!(order_close(&((x * y) * z), &(x * (y * z))), "* associates: {x} {y} {z}");
    ensure!(order_close(&(x * (y + z)), &(x * y + x * z)), "distributes: {x} {y} {z}");
    ensure!(x + zero == x && x * one == x && (x * zero).is_zero(), "identities: {x}");
    if !x.is_zero() {
        ensure!(order_close(&(x * x.recip().unwrap()), &one), "inverse: {x}");
    }
    if !x.is_zero() && !y.is_zero() {
        let eps = 1e-3;
        ensure!(
            close((x * y).ln_value(eps), x.ln_value(eps) + y.ln_value(eps), 1e-12),
            "ln of product: {x} {y}"
        );
        // the dominant term of a sum matches the larger summand in log scale
        let s = (x + y).ln_value(eps);
        let m = x.ln_value(eps).max(y.ln_value(eps));
        ensure!(s >= m - 1e-9 && s <= m + std::f64::consts::LN_2 + 1e-9, "sum dominance: {x} {y}");
        use metastable_core::ScaleComparison::*;
        let xy = x.compare_scale(&y).unwrap();
        let yx = y.compare_scale(&x).unwrap();
        let consistent = matches!(
            (xy, yx),
            (MuchSmaller, MuchLarger) | (MuchLarger, MuchSmaller) | (Commensurate(_), Commensurate(_))
        );
        ensure!(consistent, "antisymmetry: {x} {y}");
    }
    Ok(())
}

pub fn check_tree(spec: &ChainSpec) -> Result<(), TestCaseError> {
    let h = Hierarchy::build(spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let n = spec.len();
    let counts = h.cluster_counts();
    ensure!(counts[0] == n, "rank 0 has every state");
    ensure!(*counts.last().unwrap() == 1, "top rank is a single cluster");
    ensure!(counts.windows(2).all(|w| w[1] < w[0]), "strict decrease {counts:?}");
    for r in 0..counts.len() {
        let mut seen = vec![0usize; n];
        for k in 0..counts[r] {
            let states = h.tree.resolve(r, k);
            ensure!(!states.is_empty(), "empty cluster");
            for &s in states {
                seen[s] += 1;
                ensure!(h.tree.cluster_of(r, s) == k, "membership");
            }
            if r + 1 < counts.len() {
                let p = h.tree.parent(r, k);
                ensure!(h.tree.children(r + 1, p).contains(&k), "parent/child link");
            }
        }
        ensure!(seen.iter().all(|&c| c == 1), "rank {r} is not a partition");
    }
    Ok(())
}

fn build(spec: &ChainSpec) -> Result<Hierarchy, TestCaseError> {
    Hierarchy::build(spec).map_err(|e| TestCaseError::fail(e.to_string()))
}

fn nu_matrix(h: &Hierarchy, lambda: f64, c: f64) -> Result<DMatrix<f64>, TestCaseError> {
    let t = TimeScale::new(c, 0.0, lambda).unwrap();
    metastable_all(h, &t)
        .map(|m| m.nu)
        .map_err(|e| TestCaseError::fail(format!("lambda {lambda}: {e}")))
}

/// Rows of ν are probability vectors at every admissible exponent.
pub fn check_stochastic(spec: &ChainSpec) -> Result<(), TestCaseError> {
    let h = build(spec)?;
    for lambda in admissible_exponents(&h) {
        let nu = nu_matrix(&h, lambda, 1.0)?;
        for row in nu.row_iter() {
            ensure!(row.iter().all(|&p| p >= 0.0), "negative entry at lambda {lambda}");
            ensure!((row.sum() - 1.0).abs() < 1e-9, "row sum {} at lambda {lambda}", row.sum());
        }
    }
    Ok(())
}

/// Below every exit time the chain has not moved.
pub fn check_short_time(spec: &ChainSpec) -> Result<(), TestCaseError> {
    let h = build(spec)?;
    let lambda = admissible_exponents(&h)[0];
    let nu = nu_matrix(&h, lambda, 1.0)?;
    let n = spec.len();
    ensure!((nu - DMatrix::<f64>::identity(n, n)).amax() < 1e-12, "not the identity");
    Ok(())
}

/// Beyond every exit time all rows coincide with the limit of the
/// stationary law.
pub fn check_long_time(spec: &ChainSpec) -> Result<(), TestCaseError> {
    let h = build(spec)?;
    let lambda = *admissible_exponents(&h).last().unwrap();
    let nu = nu_matrix(&h, lambda, 1.0)?;
    let first = nu.row(0).clone_owned();
    for row in nu.row_iter() {
        ensure!((row - &first).amax() < 1e-12, "rows differ");
    }
    let g = spec.instantiate_generator(0.02).unwrap();
    let pi = exact_stationary(&g).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for (j, p) in pi.iter().enumerate() {
        ensure!((first[j] - p).abs() < 1e-6, "state {j}: nu {} vs stationary {p}", first[j]);
    }
    Ok(())
}

/// ν depends on `t` only through its order class.
pub fn check_scale_invariance(spec: &ChainSpec, c: f64) -> Result<(), TestCaseError> {
    let h = build(spec)?;
    for lambda in admissible_exponents(&h) {
        let a = nu_matrix(&h, lambda, 1.0)?;
        let b = nu_matrix(&h, lambda, c)?;
        ensure!(a == b, "nu changed under t -> {c} t at lambda {lambda}");
    }
    Ok(())
}
