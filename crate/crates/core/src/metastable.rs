//! Metastable distributions `ν(i, ·)` for a time scale `t(ε)`.
//!
//! For a start state `i`, `r(i)` is the lowest rank whose enclosing cluster
//! still holds the process at time `t` (`t ≪ T^{r+1}`). Inside that cluster,
//! the rank-`r(i)` clusters with `t ≪ T^{r(i)}` are traps. Without traps the
//! answer is the product of limiting invariant measures down the nesting
//! chain. With traps, the process is first followed until it enters a trap
//! (the exit distribution `η` of the stopped chain) and the answer is the
//! `η`-mixture of the metastable distributions of the entry states, each of
//! which has a strictly lower `r`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{AsymptoticOrder, ScaleComparison};
use crate::chain::{OrderMatrix, TimeScale, TimeScaleFields};
use crate::error::{CriticalEntry, Error, Result};
use crate::hierarchy::Hierarchy;
use crate::skeleton::skeleton_with_terminal;

/// `t(ε)` against every `T^r(k, ε)` with `r < ρ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleClassification {
    /// `entries[r][k]` compares `t` with `T^r(k, ε)`.
    pub entries: Vec<Vec<ScaleComparison>>,
    #[serde(skip)]
    inverse_rates: Vec<Vec<AsymptoticOrder>>,
}

impl ScaleClassification {
    /// Every `(r, k)` where `t` is commensurate with `T^r(k, ε)`.
    pub fn critical(&self) -> Vec<CriticalEntry> {
        let mut out = Vec::new();
        for (r, row) in self.entries.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                if matches!(c, ScaleComparison::Commensurate(_)) {
                    out.push(CriticalEntry {
                        rank: r,
                        cluster: k,
                        inverse_rate: self.inverse_rates[r][k],
                    });
                }
            }
        }
        out
    }

    pub fn is_admissible(&self) -> bool {
        self.critical().is_empty()
    }
}

pub fn classify_time_scale(h: &Hierarchy, t: &TimeScale) -> ScaleClassification {
    let mut entries = Vec::new();
    let mut inverse_rates = Vec::new();
    for lv in &h.levels {
        if let Some(ts) = &lv.inverse_rates {
            entries.push(
                ts.iter()
                    .map(|tk| t.order().compare_scale(tk).expect("both orders are non-zero"))
                    .collect(),
            );
            inverse_rates.push(ts.clone());
        }
    }
    ScaleClassification { entries, inverse_rates }
}

fn compare(h: &Hierarchy, t: &TimeScale, rank: usize, cluster: usize) -> Result<ScaleComparison> {
    match h.level(rank).inverse_rate(cluster) {
        None => Ok(ScaleComparison::MuchSmaller),
        Some(tk) => match t.order().compare_scale(&tk)? {
            ScaleComparison::Commensurate(_) => Err(Error::CriticalTimeScale(vec![CriticalEntry {
                rank,
                cluster,
                inverse_rate: tk,
            }])),
            c => Ok(c),
        },
    }
}

/// `r(i)`, the enclosing cluster and the traps `L(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrapAnalysis {
    pub start: usize,
    /// `r(i) ∈ [−1, ρ−1]`
    pub rank: isize,
    /// Cluster `k` of rank `r(i)+1` with `i ≺ S^{r(i)+1}_k`.
    pub enclosing: usize,
    /// Rank-`r(i)` clusters in `k` whose exit time exceeds `t`.
    pub traps: Vec<usize>,
    /// Rank-`r(i)` cluster containing `i`; `None` when `r(i) = −1`.
    pub start_cluster: Option<usize>,
}

pub fn rank_and_traps(h: &Hierarchy, t: &TimeScale, i: usize) -> Result<TrapAnalysis> {
    let top = h.top_rank();
    let mut rank: isize = -1;
    loop {
        let next = (rank + 1) as usize;
        let k = h.tree.cluster_of(next, i);
        if next == top || compare(h, t, next, k)? == ScaleComparison::MuchSmaller {
            break;
        }
        rank += 1;
    }
    let enclosing = h.tree.cluster_of((rank + 1) as usize, i);
    if rank < 0 {
        return Ok(TrapAnalysis {
            start: i,
            rank,
            enclosing,
            traps: Vec::new(),
            start_cluster: None,
        });
    }
    let r = rank as usize;
    let mut traps = Vec::new();
    for &l in h.tree.children(r + 1, enclosing) {
        if compare(h, t, r, l)? == ScaleComparison::MuchSmaller {
            traps.push(l);
        }
    }
    let start_cluster = h.tree.cluster_of(r, i);
    if traps.contains(&start_cluster) {
        return Err(Error::Internal(format!(
            "start state {i} lies in a trap at rank {r} although t exceeds its enclosing exit time"
        )));
    }
    Ok(TrapAnalysis {
        start: i,
        rank,
        enclosing,
        traps,
        start_cluster: Some(start_cluster),
    })
}

/// `ν^r(j) = μ^{0,j_1}(j_0) ⋯ μ^{r,j_{r+1}}(j_r)`; one for `r = −1`.
pub fn product_measure(h: &Hierarchy, rank: isize, cluster: usize, j: usize) -> Result<f64> {
    let top = (rank + 1) as usize;
    if !h.tree.contains(top, cluster, j) {
        return Err(Error::NotInCluster {
            state: j,
            rank: top,
            cluster,
        });
    }
    Ok((0..top)
        .map(|r| h.level(r).measures[h.tree.cluster_of(r, j)].limit)
        .product())
}

/// Rank-r clusters of the enclosing cluster outside the traps, followed by
/// the original states of the traps as a terminal set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppedChain {
    pub rank: usize,
    /// Rank-r cluster indices.
    pub live: Vec<usize>,
    /// Original states `E`.
    pub absorbing: Vec<usize>,
    /// Rates on `live ++ absorbing`; rows of absorbing states are zero.
    #[serde(skip)]
    pub rates: OrderMatrix,
}

pub fn build_stopped_chain(h: &Hierarchy, ta: &TrapAnalysis) -> Result<StoppedChain> {
    if ta.rank < 0 || ta.traps.is_empty() {
        return Err(Error::InvalidArgument("stopped chain needs a non-empty trap set".into()));
    }
    let r = ta.rank as usize;
    let live: Vec<usize> = h
        .tree
        .children(r + 1, ta.enclosing)
        .iter()
        .copied()
        .filter(|l| !ta.traps.contains(l))
        .collect();
    let mut absorbing: Vec<usize> = ta
        .traps
        .iter()
        .flat_map(|&l| h.tree.resolve(r, l).iter().copied())
        .collect();
    absorbing.sort_unstable();
    let nl = live.len();
    let n = nl + absorbing.len();
    let q = &h.level(r).rates;
    let rates = OrderMatrix::from_fn(n, n, |a, b| {
        if a >= nl || a == b {
            AsymptoticOrder::Zero
        } else if b < nl {
            q[(live[a], live[b])]
        } else {
            h.tilde(r, live[a], absorbing[b - nl])
                .expect("trap states lie outside live clusters")
        }
    });
    Ok(StoppedChain {
        rank: r,
        live,
        absorbing,
        rates,
    })
}

impl StoppedChain {
    /// `η`: where the stopped chain started at live cluster `start` enters
    /// the terminal set, as `(original state, probability)`.
    pub fn exit_distribution(&self, start: usize) -> Result<Vec<(usize, f64)>> {
        let nl = self.live.len();
        let pos = self
            .live
            .iter()
            .position(|&l| l == start)
            .ok_or_else(|| Error::InvalidArgument(format!("cluster {start} is not live")))?;
        let terminal: Vec<bool> = (0..self.rates.nrows()).map(|a| a >= nl).collect();
        let sk = skeleton_with_terminal(&self.rates, &terminal)?;
        let targets: Vec<usize> = (nl..self.rates.nrows()).collect();
        let hit = sk.hitting_distribution(&targets, pos).map_err(|e| match e {
            Error::UnreachableAbsorbingSet { detail, .. } => Error::UnreachableAbsorbingSet {
                start,
                detail: format!("{detail}; stopped chain: {self:?}"),
            },
            other => other,
        })?;
        Ok(hit.into_iter().map(|(a, p)| (self.absorbing[a - nl], p)).collect())
    }
}

/// How one row of `ν` was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapTrace {
    pub analysis: TrapAnalysis,
    /// `η(i, ·)` over entry states; empty without traps.
    pub exit: Vec<(usize, f64)>,
}

#[derive(Debug)]
struct Row {
    nu: Vec<f64>,
    trace: TrapTrace,
}

struct Solver<'a> {
    h: &'a Hierarchy,
    t: TimeScale,
    memo: Mutex<HashMap<usize, Arc<Row>>>,
}

impl<'a> Solver<'a> {
    fn new(h: &'a Hierarchy, t: &TimeScale) -> Result<Self> {
        let critical = classify_time_scale(h, t).critical();
        if !critical.is_empty() {
            return Err(Error::CriticalTimeScale(critical));
        }
        Ok(Solver {
            h,
            t: *t,
            memo: Mutex::new(HashMap::new()),
        })
    }

    fn row(&self, i: usize, budget: isize) -> Result<Arc<Row>> {
        if let Some(r) = self.memo.lock().expect("memo lock").get(&i) {
            return Ok(r.clone());
        }
        let n = self.h.spec.len();
        let ta = rank_and_traps(self.h, &self.t, i)?;
        if ta.rank > budget {
            return Err(Error::Internal(format!(
                "recursion reached state {i} with r = {} above the remaining depth {budget}",
                ta.rank
            )));
        }
        let mut nu = vec![0.0; n];
        let mut exit = Vec::new();
        if ta.traps.is_empty() {
            let top = (ta.rank + 1) as usize;
            for &j in self.h.tree.resolve(top, ta.enclosing) {
                nu[j] = product_measure(self.h, ta.rank, ta.enclosing, j)?;
            }
        } else {
            let sc = build_stopped_chain(self.h, &ta)?;
            exit = sc.exit_distribution(ta.start_cluster.expect("rank >= 0"))?;
            for &(entry, p) in &exit {
                if p == 0.0 {
                    continue;
                }
                let sub = self.row(entry, ta.rank - 1)?;
                if sub.trace.analysis.rank >= ta.rank {
                    return Err(Error::Internal(format!(
                        "entry state {entry} has r = {} not below r = {} of state {i}",
                        sub.trace.analysis.rank, ta.rank
                    )));
                }
                for (acc, v) in nu.iter_mut().zip(&sub.nu) {
                    *acc += p * v;
                }
            }
        }
        let row = Arc::new(Row {
            nu,
            trace: TrapTrace { analysis: ta, exit },
        });
        self.memo.lock().expect("memo lock").insert(i, row.clone());
        Ok(row)
    }
}

/// `ν(i, ·)` for one start state.
pub fn metastable_distribution(h: &Hierarchy, t: &TimeScale, i: usize) -> Result<Vec<f64>> {
    let solver = Solver::new(h, t)?;
    Ok(solver.row(i, h.top_rank() as isize - 1)?.nu.clone())
}

/// Row-stochastic matrix `ν(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetastableDistribution {
    pub nu: DMatrix<f64>,
    pub time: TimeScale,
    pub traces: Vec<TrapTrace>,
}

/// `ν(i, ·)` for every start state.
pub fn metastable_all(h: &Hierarchy, t: &TimeScale) -> Result<MetastableDistribution> {
    let solver = Solver::new(h, t)?;
    let n = h.spec.len();
    let budget = h.top_rank() as isize - 1;
    let rows: Vec<Arc<Row>> = (0..n)
        .into_par_iter()
        .map(|i| solver.row(i, budget))
        .collect::<Result<_>>()?;
    let nu = DMatrix::from_fn(n, n, |i, j| rows[i].nu[j]);
    Ok(MetastableDistribution {
        nu,
        time: *t,
        traces: rows.iter().map(|r| r.trace.clone()).collect(),
    })
}

impl MetastableDistribution {
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.nu.row(i).iter().copied().collect()
    }

    pub fn report(&self, h: &Hierarchy, starts: Option<&[usize]>) -> MetastableReport {
        let labels = h.spec.labels();
        let all: Vec<usize> = (0..labels.len()).collect();
        let starts = starts.unwrap_or(&all);
        MetastableReport {
            time: self.time.fields(),
            states: labels.to_vec(),
            starts: starts.iter().map(|&i| labels[i].clone()).collect(),
            nu: starts.iter().map(|&i| self.row(i)).collect(),
            trap_trace: starts
                .iter()
                .map(|&i| {
                    let tr = &self.traces[i];
                    let a = &tr.analysis;
                    TraceReport {
                        start: labels[i].clone(),
                        rank: a.rank,
                        enclosing: a.enclosing,
                        traps: a
                            .traps
                            .iter()
                            .map(|&l| h.cluster_labels(a.rank as usize, l))
                            .collect(),
                        exit: tr
                            .exit
                            .iter()
                            .map(|&(s, p)| ExitReport {
                                state: labels[s].clone(),
                                probability: p,
                            })
                            .collect(),
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitReport {
    pub state: String,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceReport {
    pub start: String,
    /// `r(i)`
    pub rank: isize,
    pub enclosing: usize,
    /// Trap clusters as label sets.
    pub traps: Vec<Vec<String>>,
    pub exit: Vec<ExitReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetastableReport {
    pub time: TimeScaleFields,
    pub states: Vec<String>,
    pub starts: Vec<String>,
    pub nu: Vec<Vec<f64>>,
    pub trap_trace: Vec<TraceReport>,
}

impl MetastableReport {
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let t = &self.time;
        let _ = writeln!(s, "time scale: {}·ε^{}·e^({}/ε)", t.c, t.b, t.lambda);
        let _ = writeln!(s, "states: {}", self.states.join(", "));
        for ((start, row), tr) in self.starts.iter().zip(&self.nu).zip(&self.trap_trace) {
            let cells: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
            let _ = writeln!(s, "nu({start}, .) = [{}]", cells.join(", "));
            let _ = write!(s, "    r = {}, enclosing cluster {}", tr.rank, tr.enclosing);
            if !tr.traps.is_empty() {
                let traps: Vec<String> = tr.traps.iter().map(|c| format!("{{{}}}", c.join(","))).collect();
                let exit: Vec<String> = tr
                    .exit
                    .iter()
                    .map(|e| format!("{}: {}", e.state, e.probability))
                    .collect();
                let _ = write!(s, ", traps {}, exit [{}]", traps.join(" "), exit.join(", "));
            }
            let _ = writeln!(s);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn t(lambda: f64) -> TimeScale {
        TimeScale::exp_growth(lambda).unwrap()
    }

    #[test]
    fn classification_examples() {
        let h = Hierarchy::build(&fixtures::chain_a()).unwrap();
        let c = classify_time_scale(&h, &t(1.5));
        assert_eq!(c.entries, vec![vec![ScaleComparison::MuchLarger, ScaleComparison::MuchSmaller]]);
        let c = classify_time_scale(&h, &t(1.0));
        assert_eq!(c.critical().len(), 1);
        assert_eq!((c.critical()[0].rank, c.critical()[0].cluster), (0, 0));
        // the top rank contributes no entries
        assert_eq!(c.entries.len(), h.top_rank());
    }

    #[test]
    fn rank_and_traps_examples() {
        let h = Hierarchy::build(&fixtures::chain_a()).unwrap();
        let ta = rank_and_traps(&h, &t(0.5), 0).unwrap();
        assert_eq!((ta.rank, ta.traps.clone(), ta.start_cluster), (-1, vec![], None));
        let ta = rank_and_traps(&h, &t(1.5), 0).unwrap();
        assert_eq!((ta.rank, ta.enclosing, ta.traps.clone(), ta.start_cluster), (0, 0, vec![1], Some(0)));

        let d = Hierarchy::build(&fixtures::chain_d()).unwrap();
        let ta = rank_and_traps(&d, &t(7.0), 0).unwrap();
        assert_eq!((ta.rank, ta.enclosing, ta.traps.clone(), ta.start_cluster), (1, 0, vec![1], Some(0)));
    }

    #[test]
    fn product_measure_examples() {
        let b = Hierarchy::build(&fixtures::chain_b()).unwrap();
        assert_eq!(product_measure(&b, -1, 2, 2).unwrap(), 1.0);
        let row: Vec<f64> = (0..3).map(|j| product_measure(&b, 0, 0, j).unwrap()).collect();
        assert_eq!(row[0], 0.0);
        assert!((row[1] - 1.0 / 3.0).abs() < 1e-15 && (row[2] - 2.0 / 3.0).abs() < 1e-15);

        let d = Hierarchy::build(&fixtures::chain_d()).unwrap();
        assert_eq!(product_measure(&d, 0, 1, 2).unwrap(), 0.5);
        assert_eq!(product_measure(&d, 0, 1, 3).unwrap(), 0.5);
        assert!(matches!(product_measure(&d, 0, 1, 0), Err(Error::NotInCluster { .. })));
    }

    #[test]
    fn stopped_chain_examples() {
        let a = Hierarchy::build(&fixtures::chain_a()).unwrap();
        let sc = build_stopped_chain(&a, &rank_and_traps(&a, &t(1.5), 0).unwrap()).unwrap();
        assert_eq!((sc.live.clone(), sc.absorbing.clone()), (vec![0], vec![1]));
        assert_eq!(sc.rates[(0, 1)], fixtures::chain_a().rate(0, 1));
        assert_eq!(sc.exit_distribution(0).unwrap(), vec![(1, 1.0)]);

        let b = Hierarchy::build(&fixtures::chain_b()).unwrap();
        let sc = build_stopped_chain(&b, &rank_and_traps(&b, &t(2.0), 0).unwrap()).unwrap();
        assert_eq!((sc.live.clone(), sc.absorbing.clone()), (vec![0], vec![1, 2]));
        assert_eq!(sc.exit_distribution(0).unwrap(), vec![(1, 1.0 / 3.0), (2, 2.0 / 3.0)]);

        let d = Hierarchy::build(&fixtures::chain_d()).unwrap();
        let sc = build_stopped_chain(&d, &rank_and_traps(&d, &t(7.0), 0).unwrap()).unwrap();
        assert_eq!((sc.live.clone(), sc.absorbing.clone()), (vec![0], vec![2, 3]));
        let half6 = AsymptoticOrder::new(0.5, 0.0, 6.0).unwrap();
        let one9 = AsymptoticOrder::new(1.0, 0.0, 9.0).unwrap();
        assert_eq!((sc.rates[(0, 1)], sc.rates[(0, 2)]), (half6, one9));
        assert_eq!(sc.exit_distribution(0).unwrap(), vec![(2, 1.0), (3, 0.0)]);
    }

    #[test]
    fn metastable_examples() {
        let a = Hierarchy::build(&fixtures::chain_a()).unwrap();
        assert_eq!(metastable_distribution(&a, &t(0.5), 0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(metastable_distribution(&a, &t(1.5), 0).unwrap(), vec![0.0, 1.0]);
        let b = Hierarchy::build(&fixtures::chain_b()).unwrap();
        let row = metastable_distribution(&b, &t(2.0), 0).unwrap();
        assert!((row[1] - 1.0 / 3.0).abs() < 1e-12 && (row[2] - 2.0 / 3.0).abs() < 1e-12);
        let d = Hierarchy::build(&fixtures::chain_d()).unwrap();
        assert_eq!(metastable_distribution(&d, &t(7.0), 0).unwrap(), vec![0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn metastable_all_examples() {
        let a = Hierarchy::build(&fixtures::chain_a()).unwrap();
        let m = metastable_all(&a, &t(3.0)).unwrap();
        assert_eq!(m.nu, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]));
        let m = metastable_all(&a, &t(0.5)).unwrap();
        assert_eq!(m.nu, DMatrix::identity(2, 2));
        let b = Hierarchy::build(&fixtures::chain_b()).unwrap();
        let m = metastable_all(&b, &t(6.0)).unwrap();
        for i in 0..3 {
            assert_eq!(m.nu[(i, 0)], 0.0);
            assert!((m.nu[(i, 1)] - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(matches!(metastable_all(&a, &t(2.0)), Err(Error::CriticalTimeScale(v)) if v.len() == 1));
    }

    #[test]
    fn report_carries_trace() {
        let d = Hierarchy::build(&fixtures::chain_d()).unwrap();
        let m = metastable_all(&d, &t(7.0)).unwrap();
        let r = m.report(&d, Some(&[0]));
        assert_eq!(r.trap_trace[0].traps, vec![vec!["s3".to_string(), "s4".to_string()]]);
        assert_eq!(r.trap_trace[0].exit[0].state, "s3");
        assert_eq!(r.time.lambda, 7.0);
        assert!(r.render_text().contains("nu(s1, .) = [0, 0, 0.5, 0.5]"));
    }
}
