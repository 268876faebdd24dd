use thiserror::Error;

use crate::asymptotics::AsymptoticOrder;
use crate::chain::Violation;

/// One `t(ε) ~ T^r(k, ε)` coincidence that makes a time scale critical.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CriticalEntry {
    pub rank: usize,
    pub cluster: usize,
    pub inverse_rate: AsymptoticOrder,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("leading coefficient must be positive, got {0}")]
    NonPositiveCoefficient(f64),

    #[error("order fields must be finite reals")]
    NonFinite,

    #[error("reciprocal or ratio with the zero order")]
    DivisionByZeroOrder,

    #[error("scale comparison with the zero order")]
    ZeroOrderComparison,

    #[error("{what} overflows double precision at eps = {eps}")]
    Overflow { what: String, eps: f64 },

    #[error("state {0} has no outgoing transitions")]
    EmptyRow(usize),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("absorbing set is not reached with probability one from state {start}: {detail}")]
    UnreachableAbsorbingSet { start: usize, detail: String },

    #[error("state {state} does not belong to cluster {cluster} of rank {rank}")]
    NotInCluster {
        state: usize,
        rank: usize,
        cluster: usize,
    },

    #[error("time scale is commensurate with {} inverse transition rate(s)", .0.len())]
    CriticalTimeScale(Vec<CriticalEntry>),

    #[error("invalid chain: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("epsilon ladder rejected: {0}")]
    LadderOutOfRange(String),

    #[error("matrix exponential needs {0} squarings (limit 1024)")]
    ScalingOverflow(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
