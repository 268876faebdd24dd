//! Metastable distributions of continuous-time Markov chains whose rates
//! have the form `α ε^β e^(−γ/ε)`.
//!
//! The pipeline is: [`ChainSpec`] → [`Hierarchy`] (nested clusters, reduced
//! rates, inverse transition rates) → [`MetastableDistribution`] for a given
//! [`TimeScale`]. The [`verify`] module checks predictions against transient
//! distributions of the generator at concrete ε.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod chain;
pub mod error;
pub mod fixtures;
pub mod hierarchy;
pub mod metastable;
pub mod skeleton;
pub mod verify;

#[cfg(test)]
mod oracle;

pub use asymptotics::{AsymptoticOrder, OrderFields, RatioLimit, ScaleComparison};
pub use chain::{ChainFile, ChainSpec, GeneratorMatrix, OrderMatrix, RateEntry, TimeScale, Violation};
pub use error::{CriticalEntry, Error, Result};
pub use hierarchy::{ClusterMeasure, ClusterTree, Hierarchy, HierarchyLevel, HierarchyReport};
pub use metastable::{MetastableDistribution, MetastableReport, ScaleClassification, StoppedChain, TrapAnalysis};
pub use skeleton::{ClassKind, Decomposition, SkeletonChain, StationaryVector};
pub use verify::{ComparisonReport, Method, OccupationStats, SimulationResult, TransientSolverConfig};
