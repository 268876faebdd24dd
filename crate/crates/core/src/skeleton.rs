//! Skeleton (limiting jump) chains, their class decomposition, stationary
//! vectors and absorption probabilities.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::asymptotics::{AsymptoticOrder, RatioLimit};
use crate::chain::OrderMatrix;
use crate::error::{Error, Result};

/// Transition matrix of the limiting jump chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonChain {
    pub p: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClassKind {
    Ergodic,
    TransientSingleton,
}

/// Partition of the states into closed classes and transient singletons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub classes: Vec<Vec<usize>>,
    pub kinds: Vec<ClassKind>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], ClassKind)> {
        self.classes.iter().map(Vec::as_slice).zip(self.kinds.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryVector {
    pub class: Vec<usize>,
    /// Probabilities aligned with `class`.
    pub lambda: Vec<f64>,
}

impl StationaryVector {
    pub fn get(&self, state: usize) -> Option<f64> {
        self.class.iter().position(|&s| s == state).map(|k| self.lambda[k])
    }
}

/// `P_ij = lim q_ij / Σ_{j'≠i} q_ij'`.
pub fn skeleton_chain(rates: &OrderMatrix) -> Result<SkeletonChain> {
    let n = rates.nrows();
    skeleton_with_terminal(rates, &vec![false; n])
}

/// Skeleton chain in which the rows flagged `terminal` are left empty; used
/// for chains stopped on entering a set.
pub fn skeleton_with_terminal(rates: &OrderMatrix, terminal: &[bool]) -> Result<SkeletonChain> {
    let n = rates.nrows();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        if terminal[i] {
            continue;
        }
        let total: AsymptoticOrder = (0..n).filter(|&j| j != i).map(|j| rates[(i, j)]).sum();
        if total.is_zero() {
            return Err(Error::EmptyRow(i));
        }
        for j in 0..n {
            if j == i {
                continue;
            }
            p[(i, j)] = match rates[(i, j)].ratio_limit(&total)? {
                RatioLimit::ZeroLimit => 0.0,
                RatioLimit::Finite(c) => c,
                RatioLimit::InfiniteLimit => {
                    return Err(Error::Internal(format!("rate {i}->{j} dominates its own row sum")))
                }
            };
        }
    }
    Ok(SkeletonChain { p })
}

impl SkeletonChain {
    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.nrows() == 0
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| self.p[(i, j)] > 0.0)
    }

    /// Closed communicating classes first (by smallest member), then every
    /// remaining state as a transient singleton (by index).
    pub fn decompose(&self) -> Decomposition {
        let n = self.len();
        let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
        let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        for i in 0..n {
            for j in self.successors(i) {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
        let mut component = vec![0usize; n];
        let sccs = tarjan_scc(&graph);
        for (c, members) in sccs.iter().enumerate() {
            for v in members {
                component[v.index()] = c;
            }
        }
        let mut ergodic = Vec::new();
        let mut transient = Vec::new();
        for members in &sccs {
            let c = component[members[0].index()];
            let closed = members
                .iter()
                .all(|v| self.successors(v.index()).all(|j| component[j] == c));
            let mut states: Vec<usize> = members.iter().map(|v| v.index()).collect();
            states.sort_unstable();
            if closed {
                ergodic.push(states);
            } else {
                transient.extend(states);
            }
        }
        ergodic.sort_by_key(|c| c[0]);
        transient.sort_unstable();
        let mut kinds = vec![ClassKind::Ergodic; ergodic.len()];
        kinds.extend(std::iter::repeat_n(ClassKind::TransientSingleton, transient.len()));
        let mut classes = ergodic;
        classes.extend(transient.into_iter().map(|s| vec![s]));
        Decomposition { classes, kinds }
    }

    /// Solves `λP = λ`, `Σλ = 1` on a closed irreducible class.
    pub fn stationary(&self, class: &[usize]) -> Result<StationaryVector> {
        let m = class.len();
        if m == 0 {
            return Err(Error::InvalidArgument("empty class".into()));
        }
        if m == 1 {
            return Ok(StationaryVector {
                class: class.to_vec(),
                lambda: vec![1.0],
            });
        }
        let sub = DMatrix::from_fn(m, m, |a, b| self.p[(class[a], class[b])]);
        for (a, &state) in class.iter().enumerate() {
            let s: f64 = sub.row(a).sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::SingularSystem(format!(
                    "class is not closed: state {} keeps mass {s}",
                    state
                )));
            }
        }
        // (Pᵀ − I) λ = 0 with the last equation replaced by normalization.
        let mut a = sub.transpose() - DMatrix::<f64>::identity(m, m);
        for c in 0..m {
            a[(m - 1, c)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(m);
        b[m - 1] = 1.0;
        let lambda = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SingularSystem("restricted skeleton is reducible".into()))?;
        let residual = (lambda.transpose() * &sub - lambda.transpose()).amax();
        if !(residual <= 1e-10) || lambda.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::SingularSystem(format!(
                "no positive stationary vector (residual {residual:e})"
            )));
        }
        Ok(StationaryVector {
            class: class.to_vec(),
            lambda: lambda.iter().copied().collect(),
        })
    }

    /// Distribution of the first state hit in `absorbing` when the skeleton
    /// walk starts at `start`. Entries are `(state, probability)` sorted by
    /// state.
    pub fn hitting_distribution(&self, absorbing: &[usize], start: usize) -> Result<Vec<(usize, f64)>> {
        let n = self.len();
        if absorbing.is_empty() {
            return Err(Error::InvalidArgument("absorbing set is empty".into()));
        }
        let mut in_e = vec![false; n];
        for &e in absorbing {
            in_e[e] = true;
        }
        let mut targets: Vec<usize> = absorbing.to_vec();
        targets.sort_unstable();
        targets.dedup();
        if in_e[start] {
            return Ok(targets.iter().map(|&j| (j, if j == start { 1.0 } else { 0.0 })).collect());
        }

        // transient states visited before absorption
        let mut reach = vec![false; n];
        reach[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for y in self.successors(x) {
                if !in_e[y] && !reach[y] {
                    reach[y] = true;
                    queue.push_back(y);
                }
            }
        }
        // states that can still reach E
        let mut feeds_e = in_e.clone();
        let mut changed = true;
        while changed {
            changed = false;
            for x in 0..n {
                if !feeds_e[x] && self.successors(x).any(|y| feeds_e[y]) {
                    feeds_e[x] = true;
                    changed = true;
                }
            }
        }
        let trapped: Vec<usize> = (0..n).filter(|&x| reach[x] && !feeds_e[x]).collect();
        if !trapped.is_empty() {
            return Err(Error::UnreachableAbsorbingSet {
                start,
                detail: format!("states {trapped:?} are reachable but never enter the absorbing set"),
            });
        }

        let live: Vec<usize> = (0..n).filter(|&x| reach[x]).collect();
        let m = live.len();
        let mut a = DMatrix::<f64>::identity(m, m);
        for (r, &x) in live.iter().enumerate() {
            for (c, &y) in live.iter().enumerate() {
                a[(r, c)] -= self.p[(x, y)];
            }
        }
        let b = DMatrix::from_fn(m, targets.len(), |r, c| self.p[(live[r], targets[c])]);
        let h = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SingularSystem("absorption system is singular".into()))?;
        let row = live.iter().position(|&x| x == start).expect("start is live");
        let mut out: Vec<(usize, f64)> = targets
            .iter()
            .enumerate()
            .map(|(c, &j)| (j, h[(row, c)].clamp(0.0, 1.0)))
            .collect();
        let total: f64 = out.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Internal(format!("exit distribution sums to {total}")));
        }
        for (_, p) in &mut out {
            *p /= total;
        }
        Ok(out)
    }
}

/// Hitting distribution as a map, for callers that prefer lookups.
pub fn hitting_map(sk: &SkeletonChain, absorbing: &[usize], start: usize) -> Result<BTreeMap<usize, f64>> {
    Ok(sk.hitting_distribution(absorbing, start)?.into_iter().collect())
}
