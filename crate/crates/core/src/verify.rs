//! Numeric checks of the asymptotic predictions at concrete ε.
//!
//! Transient laws `P_i(X_t = j)` come from `exp(tG)` computed by scaling and
//! squaring. The small-step exponential is summed as a uniformized Taylor
//! series, `e^{-Λ} Σ Λ^k P^k / k!` with `P = I + A/Λ` nonnegative, so no
//! cancellation occurs even when entries span hundreds of orders of
//! magnitude. Rows are renormalized after every squaring.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{ChainSpec, GeneratorMatrix, TimeScale};
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::metastable::MetastableDistribution;

/// Largest admissible `|γ_max − γ_min|/ε` and `|λ|/ε` for a ladder point.
pub const LADDER_EXPONENT_CAP: f64 = 60.0;

/// Row-sum drift tolerated before renormalization after each squaring.
const SQUARING_DRIFT: f64 = 1e-8;

const MAX_SQUARINGS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Expm,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientSolverConfig {
    pub method: Method,
    /// Strictly decreasing.
    pub eps_ladder: Vec<f64>,
    /// Monte Carlo paths per start state.
    pub paths: usize,
    /// Maximum jumps simulated on a single path.
    pub jump_cap: u64,
    pub rng_seed: u64,
}

impl Default for TransientSolverConfig {
    fn default() -> Self {
        TransientSolverConfig {
            method: Method::Expm,
            eps_ladder: Vec::new(),
            paths: 10_000,
            jump_cap: 10_000_000,
            rng_seed: 0,
        }
    }
}

impl TransientSolverConfig {
    pub fn expm(eps_ladder: &[f64]) -> Self {
        TransientSolverConfig {
            eps_ladder: eps_ladder.to_vec(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_ladder.is_empty() {
            return Err(Error::InvalidArgument("epsilon ladder is empty".into()));
        }
        if self.eps_ladder.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidArgument("epsilon values must be positive".into()));
        }
        if self.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("epsilon ladder must be strictly decreasing".into()));
        }
        if self.paths == 0 || self.jump_cap == 0 {
            return Err(Error::InvalidArgument("paths and jump cap must be positive".into()));
        }
        Ok(())
    }
}

/// Rejects ladder points where rates or the time scale leave the safe
/// exponent range.
pub fn check_ladder(spec: &ChainSpec, t: &TimeScale, ladder: &[f64]) -> Result<()> {
    let gammas: Vec<f64> = spec.rates().iter().filter_map(|q| q.gamma()).collect();
    let spread = match (
        gammas.iter().copied().reduce(f64::max),
        gammas.iter().copied().reduce(f64::min),
    ) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0.0,
    };
    let lambda = t.lambda().abs();
    for &eps in ladder {
        if spread / eps > LADDER_EXPONENT_CAP {
            return Err(Error::LadderOutOfRange(format!(
                "eps = {eps}: rate exponent spread {spread}/eps = {:.1} exceeds {LADDER_EXPONENT_CAP}",
                spread / eps
            )));
        }
        if lambda / eps > LADDER_EXPONENT_CAP {
            return Err(Error::LadderOutOfRange(format!(
                "eps = {eps}: time exponent |lambda|/eps = {:.1} exceeds {LADDER_EXPONENT_CAP}",
                lambda / eps
            )));
        }
    }
    Ok(())
}

/// Smallest `ε` allowed by [`check_ladder`].
pub fn smallest_admissible_eps(spec: &ChainSpec, t: &TimeScale) -> f64 {
    let gammas: Vec<f64> = spec.rates().iter().filter_map(|q| q.gamma()).collect();
    let spread = gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - gammas.iter().copied().fold(f64::INFINITY, f64::min);
    spread.max(0.0).max(t.lambda().abs()) / LADDER_EXPONENT_CAP
}

/// `exp(B)` for a generator-like `B` with `max |b_ii| ≤ 1/2`.
fn small_step_exp(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let lam = (0..n).map(|i| -b[(i, i)]).fold(0.0, f64::max);
    if lam == 0.0 {
        return DMatrix::identity(n, n);
    }
    let p = DMatrix::<f64>::identity(n, n) + b / lam;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    let mut coef = 1.0;
    for k in 1..64 {
        coef *= lam / k as f64;
        term = &term * &p;
        sum += &term * coef;
        if coef < 1e-18 {
            break;
        }
    }
    sum * (-lam).exp()
}

/// `exp(tG)` by scaling and squaring with per-squaring row renormalization.
pub fn transient_matrix(g: &GeneratorMatrix, t: f64) -> Result<DMatrix<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    let n = g.len();
    let norm = g.norm_inf();
    if norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    // log2 of ‖tG‖ without forming the product
    let log2_norm = norm.log2() + t.log2();
    let squarings = (log2_norm + 1.0).ceil().max(0.0) as usize;
    if squarings > MAX_SQUARINGS {
        return Err(Error::ScalingOverflow(squarings));
    }
    let step = (t.ln() - squarings as f64 * std::f64::consts::LN_2).exp();
    let mut m = small_step_exp(&(&g.entries * step));
    renormalize(&mut m, 0)?;
    for s in 1..=squarings {
        m = &m * &m;
        renormalize(&mut m, s)?;
    }
    Ok(m)
}

fn renormalize(m: &mut DMatrix<f64>, squaring: usize) -> Result<()> {
    for mut row in m.row_iter_mut() {
        for x in row.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let s: f64 = row.sum();
        if !((s - 1.0).abs() <= SQUARING_DRIFT) {
            return Err(Error::Internal(format!(
                "row sum drifted to {s} at squaring {squaring}"
            )));
        }
        row /= s;
    }
    Ok(())
}

/// Row `i` of `exp(tG)`.
pub fn transient_distribution(g: &GeneratorMatrix, t: f64, i: usize) -> Result<Vec<f64>> {
    Ok(transient_matrix(g, t)?.row(i).iter().copied().collect())
}

/// Mean time fractions spent in each state before `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationStats {
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub end_distribution: Vec<f64>,
    pub end_standard_error: Vec<f64>,
    pub occupation: OccupationStats,
    /// Paths stopped by the jump cap before reaching `t`.
    pub capped_paths: usize,
    /// More than 1% of paths were capped; results are unreliable.
    pub saturated: bool,
}

struct PathOutcome {
    end: usize,
    fractions: Vec<f64>,
    capped: bool,
}

fn simulate_one(g: &DMatrix<f64>, t: f64, start: usize, cap: u64, rng: &mut ChaCha8Rng) -> PathOutcome {
    let n = g.nrows();
    let mut occupied = vec![0.0; n];
    let mut state = start;
    let mut clock = 0.0;
    let mut jumps = 0u64;
    let mut capped = false;
    loop {
        let rate = -g[(state, state)];
        if rate <= 0.0 {
            occupied[state] += t - clock;
            break;
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
        if clock + hold >= t {
            occupied[state] += t - clock;
            break;
        }
        if jumps == cap {
            capped = true;
            break;
        }
        occupied[state] += hold;
        clock += hold;
        let u: f64 = rng.gen::<f64>() * rate;
        let mut acc = 0.0;
        let mut next = state;
        for j in 0..n {
            if j == state {
                continue;
            }
            acc += g[(state, j)];
            next = j;
            if u < acc {
                break;
            }
        }
        state = next;
        jumps += 1;
    }
    let total: f64 = occupied.iter().sum();
    let fractions = if total > 0.0 {
        occupied.iter().map(|x| x / total).collect()
    } else {
        let mut f = vec![0.0; n];
        f[start] = 1.0;
        f
    };
    PathOutcome {
        end: state,
        fractions,
        capped,
    }
}

fn mean_and_se(values: impl Iterator<Item = f64>, count: usize) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let mean = v.iter().sum::<f64>() / count as f64;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}

/// Jump-chain simulation with exponential holding times. Path `p` uses the
/// ChaCha stream `p` of `rng_seed`, so results do not depend on scheduling.
pub fn simulate_paths(g: &GeneratorMatrix, t: f64, i: usize, cfg: &TransientSolverConfig) -> Result<SimulationResult> {
    if cfg.paths == 0 {
        return Err(Error::InvalidArgument("at least one path is required".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    let n = g.len();
    let outcomes: Vec<PathOutcome> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(p as u64);
            simulate_one(&g.entries, t, i, cfg.jump_cap, &mut rng)
        })
        .collect();
    let paths = outcomes.len();
    let capped_paths = outcomes.iter().filter(|o| o.capped).count();
    let mut end_distribution = Vec::with_capacity(n);
    let mut end_standard_error = Vec::with_capacity(n);
    let mut mean = Vec::with_capacity(n);
    let mut standard_error = Vec::with_capacity(n);
    for j in 0..n {
        let (m, se) = mean_and_se(outcomes.iter().map(|o| (o.end == j) as u8 as f64), paths);
        end_distribution.push(m);
        end_standard_error.push(se);
        let (m, se) = mean_and_se(outcomes.iter().map(|o| o.fractions[j]), paths);
        mean.push(m);
        standard_error.push(se);
    }
    Ok(SimulationResult {
        end_distribution,
        end_standard_error,
        occupation: OccupationStats {
            mean,
            standard_error,
            paths,
        },
        capped_paths,
        saturated: capped_paths * 100 > paths,
    })
}

/// Stationary vector of an irreducible generator by the GTH state-reduction
/// algorithm, which never subtracts and keeps full relative accuracy on
/// exponentially small components.
pub fn exact_stationary(g: &GeneratorMatrix) -> Result<Vec<f64>> {
    let n = g.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty generator".into()));
    }
    let mut a = g.entries.clone();
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if !(s > 0.0) {
            return Err(Error::SingularSystem(format!(
                "state {k} cannot reach states 0..{k} (reducible or underflowed generator)"
            )));
        }
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                if i != j {
                    a[(i, j)] += aik * a[(k, j)];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[(i, k)]).sum();
    }
    let total: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= total;
    }
    let norm = g.norm_inf();
    let residual = (0..n)
        .map(|j| (0..n).map(|i| pi[i] * g.entries[(i, j)]).sum::<f64>().abs())
        .fold(0.0, f64::max);
    if residual > 1e-10 * norm {
        return Err(Error::SingularSystem(format!("stationary residual {residual:e}")));
    }
    Ok(pi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderPoint {
    pub eps: f64,
    /// `t(ε)`
    pub time: f64,
    /// Numeric rows aligned with the report's `starts`.
    pub numeric: Vec<Vec<f64>>,
    /// Monte Carlo standard errors; empty for the matrix exponential.
    pub standard_error: Vec<Vec<f64>>,
    pub row_errors: Vec<f64>,
    pub max_error: f64,
    pub capped_paths: usize,
    /// Rates that evaluated to zero at this ε.
    pub underflow: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub states: Vec<String>,
    pub starts: Vec<String>,
    pub method: Method,
    pub predicted: Vec<Vec<f64>>,
    pub points: Vec<LadderPoint>,
    /// Max errors never increase along the ladder.
    pub monotone: bool,
    pub final_max_error: f64,
}

/// Slack under which two max errors count as equal when judging monotonicity.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub eps: f64,
    pub start: String,
    pub state: String,
    pub predicted: f64,
    pub numeric: f64,
    pub abs_error: f64,
}

impl ComparisonReport {
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut out = Vec::new();
        for p in &self.points {
            for (r, start) in self.starts.iter().enumerate() {
                for (j, state) in self.states.iter().enumerate() {
                    let predicted = self.predicted[r][j];
                    let numeric = p.numeric[r][j];
                    out.push(CsvRow {
                        eps: p.eps,
                        start: start.clone(),
                        state: state.clone(),
                        predicted,
                        numeric,
                        abs_error: (numeric - predicted).abs(),
                    });
                }
            }
        }
        out
    }

    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "method: {:?}; states: {}", self.method, self.states.join(", "));
        for (start, row) in self.starts.iter().zip(&self.predicted) {
            let _ = writeln!(s, "predicted nu({start}, .) = {row:?}");
        }
        for p in &self.points {
            let _ = writeln!(s, "eps = {}  t = {:e}  max error = {:.3e}", p.eps, p.time, p.max_error);
            for (start, row) in self.starts.iter().zip(&p.numeric) {
                let _ = writeln!(s, "    {start}: {row:?}");
            }
            if p.capped_paths > 0 {
                let _ = writeln!(s, "    warning: {} paths hit the jump cap", p.capped_paths);
            }
        }
        let _ = writeln!(
            s,
            "final max error {:.3e}; errors {}",
            self.final_max_error,
            if self.monotone { "non-increasing" } else { "NOT monotone" }
        );
        s
    }
}

/// Numeric rows at every ladder ε against the predicted `ν`, for the given
/// start states.
pub fn compare_rows(
    h: &Hierarchy,
    t: &TimeScale,
    nu: &MetastableDistribution,
    cfg: &TransientSolverConfig,
    starts: &[usize],
) -> Result<ComparisonReport> {
    cfg.validate()?;
    check_ladder(&h.spec, t, &cfg.eps_ladder)?;
    let points: Vec<LadderPoint> = cfg
        .eps_ladder
        .par_iter()
        .map(|&eps| ladder_point(h, t, nu, cfg, starts, eps))
        .collect::<Result<_>>()?;
    let monotone = points
        .windows(2)
        .all(|w| w[1].max_error <= w[0].max_error + MONOTONE_SLACK);
    let final_max_error = points.last().map(|p| p.max_error).unwrap_or(f64::NAN);
    let labels = h.spec.labels();
    Ok(ComparisonReport {
        states: labels.to_vec(),
        starts: starts.iter().map(|&i| labels[i].clone()).collect(),
        method: cfg.method,
        predicted: starts.iter().map(|&i| nu.row(i)).collect(),
        points,
        monotone,
        final_max_error,
    })
}

/// [`compare_rows`] over every start state.
pub fn compare(
    h: &Hierarchy,
    t: &TimeScale,
    nu: &MetastableDistribution,
    cfg: &TransientSolverConfig,
) -> Result<ComparisonReport> {
    let all: Vec<usize> = (0..h.spec.len()).collect();
    compare_rows(h, t, nu, cfg, &all)
}

fn ladder_point(
    h: &Hierarchy,
    t: &TimeScale,
    nu: &MetastableDistribution,
    cfg: &TransientSolverConfig,
    starts: &[usize],
    eps: f64,
) -> Result<LadderPoint> {
    let g = h.spec.instantiate_generator(eps)?;
    let time = t.evaluate(eps)?;
    let (numeric, standard_error, capped_paths) = match cfg.method {
        Method::Expm => {
            let m = transient_matrix(&g, time)?;
            let rows = starts.iter().map(|&i| m.row(i).iter().copied().collect()).collect();
            (rows, Vec::new(), 0)
        }
        Method::MonteCarlo => {
            let mut rows = Vec::new();
            let mut ses = Vec::new();
            let mut capped = 0;
            for &i in starts {
                let sim = simulate_paths(&g, time, i, cfg)?;
                rows.push(sim.end_distribution);
                ses.push(sim.end_standard_error);
                capped += sim.capped_paths;
            }
            (rows, ses, capped)
        }
    };
    for row in &numeric {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-8 {
            return Err(Error::Internal(format!("numeric row sums to {s} at eps = {eps}")));
        }
    }
    let row_errors: Vec<f64> = starts
        .iter()
        .zip(&numeric)
        .map(|(&i, row)| {
            row.iter()
                .zip(nu.nu.row(i).iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let max_error = row_errors.iter().copied().fold(0.0, f64::max);
    Ok(LadderPoint {
        eps,
        time,
        numeric,
        standard_error,
        row_errors,
        max_error,
        capped_paths,
        underflow: g.underflow.len(),
    })
}
