//! The hierarchy of reduced chains.
//!
//! Rank 0 is the original chain. At each rank the skeleton chain splits the
//! current clusters into closed classes and transient singletons; these
//! become the clusters of the next rank, with reduced rates obtained by
//! weighting the outgoing rates of each member with its invariant measure
//! inside the class. The construction stops at the first rank with a single
//! cluster (rank `ρ`).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::asymptotics::{AsymptoticOrder, OrderFields, RatioLimit};
use crate::chain::{ChainSpec, OrderMatrix};
use crate::error::{Error, Result};
use crate::skeleton::{skeleton_chain, ClassKind, Decomposition, SkeletonChain};

/// Nested clusters for every rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    /// `children[r][k]`: rank-(r−1) clusters inside `S^r_k` (rank 0: the state).
    children: Vec<Vec<Vec<usize>>>,
    /// `states[r][k]`: original states `j ≺ S^r_k`, sorted.
    states: Vec<Vec<Vec<usize>>>,
    /// `member[r][j]`: the rank-r cluster containing original state `j`.
    member: Vec<Vec<usize>>,
}

impl ClusterTree {
    fn singletons(n: usize) -> Self {
        ClusterTree {
            children: vec![(0..n).map(|j| vec![j]).collect()],
            states: vec![(0..n).map(|j| vec![j]).collect()],
            member: vec![(0..n).collect()],
        }
    }

    fn push_rank(&mut self, classes: &[Vec<usize>]) {
        let prev_states = self.states.last().expect("rank 0 exists");
        let prev_member = self.member.last().expect("rank 0 exists");
        let mut of_prev = vec![0usize; prev_states.len()];
        for (k, c) in classes.iter().enumerate() {
            for &i in c {
                of_prev[i] = k;
            }
        }
        let states = classes
            .iter()
            .map(|c| {
                let mut s: Vec<usize> = c.iter().flat_map(|&i| prev_states[i].iter().copied()).collect();
                s.sort_unstable();
                s
            })
            .collect();
        let member = prev_member.iter().map(|&i| of_prev[i]).collect();
        self.children.push(classes.to_vec());
        self.states.push(states);
        self.member.push(member);
    }

    /// Number of ranks, `ρ + 1`.
    pub fn depth(&self) -> usize {
        self.children.len()
    }

    /// `n_r`
    pub fn cluster_count(&self, rank: usize) -> usize {
        self.children[rank].len()
    }

    pub fn children(&self, rank: usize, cluster: usize) -> &[usize] {
        &self.children[rank][cluster]
    }

    /// Original states `j ≺ S^rank_cluster`.
    pub fn resolve(&self, rank: usize, cluster: usize) -> &[usize] {
        &self.states[rank][cluster]
    }

    /// The rank-`rank` cluster that contains original state `j`.
    pub fn cluster_of(&self, rank: usize, state: usize) -> usize {
        self.member[rank][state]
    }

    /// `j ≺ S^rank_cluster`
    pub fn contains(&self, rank: usize, cluster: usize, state: usize) -> bool {
        self.member[rank][state] == cluster
    }

    /// The rank-(r+1) cluster containing rank-r cluster `k`.
    pub fn parent(&self, rank: usize, cluster: usize) -> usize {
        let any_state = self.states[rank][cluster][0];
        self.member[rank + 1][any_state]
    }
}

/// Invariant measure of one rank-r cluster inside its rank-(r+1) cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterMeasure {
    /// `μ^{r,k}(i, ε)`
    pub order: AsymptoticOrder,
    /// `μ^{r,k}(i)` as ε ↓ 0
    pub limit: f64,
}

impl ClusterMeasure {
    const ONE: ClusterMeasure = ClusterMeasure {
        order: AsymptoticOrder::ONE,
        limit: 1.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyLevel {
    pub rank: usize,
    /// `Q^r` on the rank-r clusters.
    pub rates: OrderMatrix,
    /// `T^r(k, ε)`; `None` at rank ρ where every cluster is absorbing.
    pub inverse_rates: Option<Vec<AsymptoticOrder>>,
    pub skeleton: Option<SkeletonChain>,
    pub decomposition: Option<Decomposition>,
    /// Indexed by rank-r cluster.
    pub measures: Vec<ClusterMeasure>,
    /// `Q̃^r_{kj}`; `None` where `j ≺ S^r_k`.
    pub tilde: DMatrix<Option<AsymptoticOrder>>,
}

impl HierarchyLevel {
    pub fn cluster_count(&self) -> usize {
        self.rates.nrows()
    }

    pub fn inverse_rate(&self, cluster: usize) -> Option<AsymptoticOrder> {
        self.inverse_rates.as_ref().map(|t| t[cluster])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub spec: ChainSpec,
    pub levels: Vec<HierarchyLevel>,
    pub tree: ClusterTree,
}

/// `T(i, ε) = (Σ_{j≠i} Q_ij)^(-1)` for every row.
pub fn inverse_transition_rates(rates: &OrderMatrix) -> Result<Vec<AsymptoticOrder>> {
    let n = rates.nrows();
    (0..n)
        .map(|i| {
            let total: AsymptoticOrder = (0..n).filter(|&j| j != i).map(|j| rates[(i, j)]).sum();
            total.recip().map_err(|_| Error::EmptyRow(i))
        })
        .collect()
}

/// `μ(i, ε) ~ λ(i) T(i, ε) / T̄(ε)` for a chain whose skeleton is a single
/// closed class. `rates` are the rates restricted to the class and `lambda`
/// the stationary vector of its skeleton.
pub fn cluster_invariant_measure(rates: &OrderMatrix, lambda: &[f64]) -> Result<Vec<ClusterMeasure>> {
    let m = rates.nrows();
    if m == 1 {
        return Ok(vec![ClusterMeasure::ONE]);
    }
    if lambda.len() != m {
        return Err(Error::InvalidArgument("stationary vector length mismatch".into()));
    }
    let times = inverse_transition_rates(rates)?;
    let weighted: Vec<AsymptoticOrder> = times
        .iter()
        .zip(lambda)
        .map(|(t, &l)| t.scale(l))
        .collect::<Result<_>>()?;
    let mean_step: AsymptoticOrder = weighted.iter().sum();
    let inv_mean = mean_step.recip()?;
    weighted
        .into_iter()
        .map(|w| {
            let order = w * inv_mean;
            let limit = match order.ratio_limit(&AsymptoticOrder::ONE)? {
                RatioLimit::Finite(c) => c,
                RatioLimit::ZeroLimit => 0.0,
                RatioLimit::InfiniteLimit => {
                    return Err(Error::Internal(format!("invariant measure {order} exceeds one")))
                }
            };
            Ok(ClusterMeasure { order, limit })
        })
        .collect()
}

/// Skeleton stationary vector followed by [`cluster_invariant_measure`].
fn class_measure(rates: &OrderMatrix, class: &[usize]) -> Result<Vec<ClusterMeasure>> {
    if class.len() == 1 {
        return Ok(vec![ClusterMeasure::ONE]);
    }
    let restricted = OrderMatrix::from_fn(class.len(), class.len(), |a, b| rates[(class[a], class[b])]);
    let sk = skeleton_chain(&restricted)?;
    let all: Vec<usize> = (0..class.len()).collect();
    let lambda = sk.stationary(&all)?;
    cluster_invariant_measure(&restricted, &lambda.lambda)
}

/// `Q^{r+1}_kl = Σ_{i∈k} Σ_{j∈l} μ^{r,k}(i, ε) Q^r_ij`.
pub fn reduce(rates: &OrderMatrix, classes: &[Vec<usize>], measures: &[ClusterMeasure]) -> OrderMatrix {
    let n = classes.len();
    OrderMatrix::from_fn(n, n, |k, l| {
        if k == l {
            return AsymptoticOrder::Zero;
        }
        classes[k]
            .iter()
            .flat_map(|&i| classes[l].iter().map(move |&j| measures[i].order * rates[(i, j)]))
            .sum()
    })
}

/// `Q̃^{r+1}_kj = Σ_{i∈k} μ^{r,k}(i, ε) Q̃^r_ij` for `j` outside `S^{r+1}_k`.
pub fn tilde_rates(
    tilde: &DMatrix<Option<AsymptoticOrder>>,
    classes: &[Vec<usize>],
    measures: &[ClusterMeasure],
    resolved: &[Vec<usize>],
) -> DMatrix<Option<AsymptoticOrder>> {
    let n_states = tilde.ncols();
    DMatrix::from_fn(classes.len(), n_states, |k, j| {
        if resolved[k].binary_search(&j).is_ok() {
            return None;
        }
        Some(
            classes[k]
                .iter()
                .map(|&i| measures[i].order * tilde[(i, j)].expect("j lies outside every member"))
                .sum(),
        )
    })
}

impl Hierarchy {
    /// Builds every rank up to the first one with a single cluster.
    pub fn build(spec: &ChainSpec) -> Result<Hierarchy> {
        let violations = spec.validate();
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let n = spec.len();
        let mut tree = ClusterTree::singletons(n);
        let mut levels = Vec::new();
        let mut rates = spec.rates().clone();
        let mut tilde = DMatrix::from_fn(n, n, |k, j| if k == j { None } else { Some(spec.rate(k, j)) });

        for rank in 0.. {
            let count = rates.nrows();
            if count == 1 {
                levels.push(HierarchyLevel {
                    rank,
                    rates,
                    inverse_rates: None,
                    skeleton: None,
                    decomposition: None,
                    measures: vec![ClusterMeasure::ONE],
                    tilde,
                });
                break;
            }
            let inverse = inverse_transition_rates(&rates)?;
            let skeleton = skeleton_chain(&rates)?;
            let decomposition = skeleton.decompose();
            let mut measures = vec![ClusterMeasure::ONE; count];
            for (class, kind) in decomposition.iter() {
                if kind == ClassKind::Ergodic {
                    for (&i, m) in class.iter().zip(class_measure(&rates, class)?) {
                        measures[i] = m;
                    }
                }
            }
            if decomposition.len() >= count {
                return Err(Error::Internal(format!(
                    "rank {rank}: cluster count did not decrease ({count} -> {})",
                    decomposition.len()
                )));
            }
            let next_rates = reduce(&rates, &decomposition.classes, &measures);
            tree.push_rank(&decomposition.classes);
            let next_tilde = tilde_rates(&tilde, &decomposition.classes, &measures, &tree.states[rank + 1]);
            levels.push(HierarchyLevel {
                rank,
                rates,
                inverse_rates: Some(inverse),
                skeleton: Some(skeleton),
                decomposition: Some(decomposition),
                measures,
                tilde,
            });
            rates = next_rates;
            tilde = next_tilde;
        }
        Ok(Hierarchy {
            spec: spec.clone(),
            levels,
            tree,
        })
    }

    /// `ρ`
    pub fn top_rank(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, rank: usize) -> &HierarchyLevel {
        &self.levels[rank]
    }

    pub fn cluster_counts(&self) -> Vec<usize> {
        self.levels.iter().map(HierarchyLevel::cluster_count).collect()
    }

    /// `Q̃^r_{kj}`; `None` when `j ≺ S^r_k`.
    pub fn tilde(&self, rank: usize, cluster: usize, state: usize) -> Option<AsymptoticOrder> {
        self.levels[rank].tilde[(cluster, state)]
    }

    pub fn cluster_labels(&self, rank: usize, cluster: usize) -> Vec<String> {
        self.tree
            .resolve(rank, cluster)
            .iter()
            .map(|&j| self.spec.labels()[j].clone())
            .collect()
    }

    pub fn report(&self) -> HierarchyReport {
        let ranks = self
            .levels
            .iter()
            .map(|lv| {
                let r = lv.rank;
                let n = lv.cluster_count();
                let mut rates = Vec::new();
                for k in 0..n {
                    for l in 0..n {
                        if let Some(f) = lv.rates[(k, l)].fields() {
                            rates.push(ReportRate { from: k, to: l, order: f });
                        }
                    }
                }
                RankReport {
                    rank: r,
                    clusters: (0..n).map(|k| self.cluster_labels(r, k)).collect(),
                    parent: (0..n)
                        .map(|k| (r < self.top_rank()).then(|| self.tree.parent(r, k)))
                        .collect(),
                    rates,
                    inverse_rates: lv
                        .inverse_rates
                        .as_ref()
                        .map(|t| t.iter().map(|x| x.fields().expect("non-zero")).collect()),
                    mu: lv.measures.clone(),
                }
            })
            .collect();
        HierarchyReport {
            states: self.spec.labels().to_vec(),
            rho: self.top_rank(),
            cluster_counts: self.cluster_counts(),
            ranks,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRate {
    pub from: usize,
    pub to: usize,
    #[serde(flatten)]
    pub order: OrderFields,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub rank: usize,
    /// Each cluster as the labels of its original states.
    pub clusters: Vec<Vec<String>>,
    /// Enclosing cluster at the next rank (absent at the top rank).
    pub parent: Vec<Option<usize>>,
    pub rates: Vec<ReportRate>,
    /// `None` at the top rank, where exit times are infinite.
    pub inverse_rates: Option<Vec<OrderFields>>,
    pub mu: Vec<ClusterMeasure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HierarchyReport {
    pub states: Vec<String>,
    pub rho: usize,
    pub cluster_counts: Vec<usize>,
    pub ranks: Vec<RankReport>,
}

impl HierarchyReport {
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "states: {}", self.states.join(", "));
        let _ = writeln!(s, "rho = {}, clusters per rank = {:?}", self.rho, self.cluster_counts);
        for rk in &self.ranks {
            let _ = writeln!(s, "\nrank {}:", rk.rank);
            for (k, c) in rk.clusters.iter().enumerate() {
                let t = match &rk.inverse_rates {
                    Some(ts) => fmt_fields(&ts[k]),
                    None => "inf".to_string(),
                };
                let _ = writeln!(
                    s,
                    "  [{k}] {{{}}}  T = {t}  mu = {} (order {})",
                    c.join(","),
                    rk.mu[k].limit,
                    rk.mu[k].order
                );
            }
            for q in &rk.rates {
                let _ = writeln!(s, "  Q[{} -> {}] = {}", q.from, q.to, fmt_fields(&q.order));
            }
        }
        s
    }
}

fn fmt_fields(f: &OrderFields) -> String {
    AsymptoticOrder::new(f.alpha, f.beta, f.gamma)
        .map(|o| o.to_string())
        .unwrap_or_else(|_| "?".into())
}
