//! Chain specifications, validation, zero-rate repair and numeric generators.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticOrder;
use crate::error::{Error, Result};

/// Square matrix of asymptotic orders; diagonal entries are always `Zero`.
pub type OrderMatrix = DMatrix<AsymptoticOrder>;

/// A finite state space with ε-dependent off-diagonal transition rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    labels: Vec<String>,
    rates: OrderMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    EmptyChain,
    DuplicateLabel(String),
    /// Missing rate between two distinct states (0-based indices).
    ZeroRate { from: usize, to: usize },
    InvalidRate { from: usize, to: usize, reason: String },
    IndexOutOfRange { from: usize, to: usize },
    SelfLoop(usize),
    DuplicateRate { from: usize, to: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyChain => write!(f, "chain has no states"),
            Violation::DuplicateLabel(l) => write!(f, "duplicate state label {l:?}"),
            Violation::ZeroRate { from, to } => write!(f, "zero rate {from} -> {to}"),
            Violation::InvalidRate { from, to, reason } => {
                write!(f, "rate {from} -> {to}: {reason}")
            }
            Violation::IndexOutOfRange { from, to } => {
                write!(f, "rate {from} -> {to} refers to a missing state")
            }
            Violation::SelfLoop(i) => write!(f, "self-loop rate at state {i}"),
            Violation::DuplicateRate { from, to } => write!(f, "rate {from} -> {to} given twice"),
        }
    }
}

impl ChainSpec {
    /// Builds a spec; the diagonal of `rates` is cleared.
    pub fn new(labels: Vec<String>, mut rates: OrderMatrix) -> Result<Self> {
        let n = labels.len();
        if rates.nrows() != n || rates.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "rate matrix is {}x{} but there are {n} states",
                rates.nrows(),
                rates.ncols()
            )));
        }
        for i in 0..n {
            rates[(i, i)] = AsymptoticOrder::Zero;
        }
        Ok(ChainSpec { labels, rates })
    }

    /// Convenience constructor with labels `s1..sN` and rates given as
    /// `(from, to, alpha, beta, gamma)` with 0-based indices.
    pub fn from_triples(n: usize, entries: &[(usize, usize, f64, f64, f64)]) -> Result<Self> {
        let labels = (1..=n).map(|i| format!("s{i}")).collect();
        let mut rates = OrderMatrix::from_element(n, n, AsymptoticOrder::Zero);
        for &(i, j, a, b, g) in entries {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidArgument(format!("bad rate index {i} -> {j}")));
            }
            rates[(i, j)] = AsymptoticOrder::new(a, b, g)?;
        }
        ChainSpec::new(labels, rates)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rates(&self) -> &OrderMatrix {
        &self.rates
    }

    pub fn rate(&self, from: usize, to: usize) -> AsymptoticOrder {
        self.rates[(from, to)]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Every violation of the positivity and labeling assumptions.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.labels.is_empty() {
            out.push(Violation::EmptyChain);
        }
        let mut seen = HashSet::new();
        for l in &self.labels {
            if !seen.insert(l.as_str()) {
                out.push(Violation::DuplicateLabel(l.clone()));
            }
        }
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i != j && self.rates[(i, j)].is_zero() {
                    out.push(Violation::ZeroRate { from: i, to: j });
                }
            }
        }
        out
    }

    /// `Γ = 10 · (1 + Σ |γ_ij| + |β_ij|)` over the non-zero rates.
    pub fn repair_gamma(&self) -> f64 {
        let total: f64 = self
            .rates
            .iter()
            .filter_map(|r| r.fields())
            .map(|f| f.gamma.abs() + f.beta.abs())
            .sum();
        10.0 * (1.0 + total)
    }

    /// Replaces every missing off-diagonal rate by `e^(−Γ/ε)`; `Γ` is large
    /// enough that repaired edges never set any leading order.
    pub fn repair_zero_rates(&self) -> ChainSpec {
        let gamma = self.repair_gamma();
        let fill = AsymptoticOrder::Term {
            alpha: 1.0,
            beta: 0.0,
            gamma,
        };
        let n = self.len();
        let mut rates = self.rates.clone();
        for i in 0..n {
            for j in 0..n {
                if i != j && rates[(i, j)].is_zero() {
                    rates[(i, j)] = fill;
                }
            }
        }
        ChainSpec {
            labels: self.labels.clone(),
            rates,
        }
    }

    /// Indices of the zero off-diagonal entries.
    pub fn zero_rates(&self) -> Vec<(usize, usize)> {
        self.validate()
            .into_iter()
            .filter_map(|v| match v {
                Violation::ZeroRate { from, to } => Some((from, to)),
                _ => None,
            })
            .collect()
    }

    /// Generator `G(ε)` with `g_ij = q_ij(ε)` and rows summing to zero.
    pub fn instantiate_generator(&self, eps: f64) -> Result<GeneratorMatrix> {
        let n = self.len();
        let mut g = DMatrix::<f64>::zeros(n, n);
        let mut underflow = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = self.rates[(i, j)];
                let v = q.evaluate(eps)?;
                if v == 0.0 && !q.is_zero() {
                    underflow.push((i, j));
                }
                g[(i, j)] = v;
            }
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
            g[(i, i)] = -s;
        }
        Ok(GeneratorMatrix {
            eps,
            entries: g,
            underflow,
        })
    }

    pub fn to_file(&self) -> ChainFile {
        let n = self.len();
        let mut rates = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if let Some(f) = self.rates[(i, j)].fields() {
                    rates.push(RateEntry {
                        from: i,
                        to: j,
                        alpha: f.alpha,
                        beta: f.beta,
                        gamma: f.gamma,
                    });
                }
            }
        }
        ChainFile {
            states: self.labels.clone(),
            rates,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("chain file serializes")
    }

    /// Parses and structurally checks a chain file. Missing rates are
    /// accepted here; [`ChainSpec::validate`] reports them.
    pub fn from_json(text: &str) -> Result<ChainSpec> {
        let file: ChainFile = serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("{e} (line {}, column {})", e.line(), e.column()))
        })?;
        file.into_spec()
    }
}

/// On-disk chain format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub states: Vec<String>,
    pub rates: Vec<RateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub from: usize,
    pub to: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ChainFile {
    pub fn into_spec(self) -> Result<ChainSpec> {
        let n = self.states.len();
        let mut rates = OrderMatrix::from_element(n, n, AsymptoticOrder::Zero);
        let mut problems = Vec::new();
        let mut seen = HashSet::new();
        for r in &self.rates {
            if r.from >= n || r.to >= n {
                problems.push(Violation::IndexOutOfRange { from: r.from, to: r.to });
                continue;
            }
            if r.from == r.to {
                problems.push(Violation::SelfLoop(r.from));
                continue;
            }
            if !seen.insert((r.from, r.to)) {
                problems.push(Violation::DuplicateRate { from: r.from, to: r.to });
                continue;
            }
            match AsymptoticOrder::new(r.alpha, r.beta, r.gamma) {
                Ok(q) => rates[(r.from, r.to)] = q,
                Err(e) => problems.push(Violation::InvalidRate {
                    from: r.from,
                    to: r.to,
                    reason: e.to_string(),
                }),
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        ChainSpec::new(self.states, rates)
    }
}

/// `t(ε) = c · ε^b · e^(λ/ε)`, stored as an order with `gamma = −λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScale(AsymptoticOrder);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScaleFields {
    pub c: f64,
    pub b: f64,
    pub lambda: f64,
}

impl TimeScale {
    pub fn new(c: f64, b: f64, lambda: f64) -> Result<Self> {
        Ok(TimeScale(AsymptoticOrder::new(c, b, -lambda)?))
    }

    /// `e^(λ/ε)`
    pub fn exp_growth(lambda: f64) -> Result<Self> {
        Self::new(1.0, 0.0, lambda)
    }

    pub fn from_order(order: AsymptoticOrder) -> Result<Self> {
        if order.is_zero() {
            return Err(Error::InvalidArgument("time scale cannot be zero".into()));
        }
        Ok(TimeScale(order))
    }

    pub fn order(&self) -> AsymptoticOrder {
        self.0
    }

    pub fn fields(&self) -> TimeScaleFields {
        let f = self.0.fields().expect("time scale is non-zero");
        TimeScaleFields {
            c: f.alpha,
            b: f.beta,
            lambda: -f.gamma + 0.0,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.fields().lambda
    }

    pub fn evaluate(&self, eps: f64) -> Result<f64> {
        self.0.evaluate(eps)
    }

    /// `c · t`
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Ok(TimeScale(self.0.scale(c)?))
    }
}

impl FromStr for TimeScale {
    type Err = Error;

    /// Parses `C,B,LAMBDA`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("time scale must be C,B,LAMBDA, got {s:?}")));
        }
        let mut v = [0.0; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::Parse(format!("not a number in time scale: {p:?}")))?;
        }
        TimeScale::new(v[0], v[1], v[2])
    }
}

impl fmt::Display for TimeScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.fields();
        write!(f, "{}·ε^{}·e^({}/ε)", t.c, t.b, t.lambda)
    }
}

impl Serialize for TimeScale {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.fields().serialize(s)
    }
}

/// Numeric generator at a fixed ε.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub eps: f64,
    pub entries: DMatrix<f64>,
    /// Off-diagonal entries whose non-zero order evaluated to 0.0.
    pub underflow: Vec<(usize, usize)>,
}

impl GeneratorMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
