use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid simplex weights: {0}")]
    InvalidSimplex(String),
    #[error("invalid polyhedron: {0}")]
    InvalidPolyhedron(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("set is unbounded")]
    UnboundedSet,
    #[error("unsupported dimension {0} (at most 4 is supported)")]
    UnsupportedDimension(usize),
    #[error("LP solver failed: {0}")]
    SolverError(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("shape matrix does not have full column rank")]
    RankDeficientL,
    #[error("rho entry {0} is zero; finite step bound undefined")]
    ZeroRho(usize),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("sampling failed: {0}")]
    SamplingFailure(String),
    #[error("no start reached feasibility (best violation {best_violation:e})")]
    NoFeasibleStart { best_violation: f64, profile: Vec<(String, f64)> },
}
