use thiserror::Error;

use crate::feasibility::Violation;
use crate::path::PathViolation;

/// Errors raised by the library.
///
/// Numeric payloads are stored as `f64` so the type does not depend on the
/// scalar parameter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid simplex vector: {0}")]
    InvalidSimplex(String),
    #[error("capacity mismatch: alpha has capacity {alpha}, omega has capacity {omega}")]
    CapacityMismatch { alpha: usize, omega: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible constraint: {0}")]
    Infeasible(Violation),
    #[error("rate is infinite: {0}")]
    InfiniteRate(String),
    #[error("invalid path: {0}")]
    InvalidPath(PathViolation),
    #[error("degenerate split: piece ending at level {level} has zero urn mass but must absorb balls")]
    DegenerateSplit { level: usize },
    #[error("constraint is reducible at level {level}; decompose it first")]
    Reducible { level: usize },
    #[error("root bracketing failed: {0}")]
    BracketFailure(String),
    #[error("Newton iteration failed after {iterations} iterations (best residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("{what} did not reach tolerance (residual {residual:e})")]
    SolverFailure { what: String, residual: f64 },
    #[error("grid point {x} touches the boundary of [0, {beta}]")]
    BoundaryEvaluation { x: f64, beta: f64 },
    #[error("unsupported constraint family: {0}")]
    UnsupportedConstraintFamily(String),
    #[error("constraints cannot be met within truncation: {0}")]
    InfeasibleTruncation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
