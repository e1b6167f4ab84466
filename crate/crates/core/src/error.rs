use thiserror::Error;

/// Errors raised by the graph, noise, dynamics, inference, moment and metric
/// routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph with {n} nodes has no edges (maximum in-degree is zero)")]
    EmptyGraph { n: usize },
    #[error("gamma must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("invalid adjacency: {0}")]
    InvalidAdjacency(String),
    #[error("invalid topology matrix: {0}")]
    InvalidTopology(String),
    #[error("no spanning tree after {attempts} draws with edge probability {edge_prob}")]
    SpanningTreeUnreachable { attempts: usize, edge_prob: f64 },
    #[error("eigenvalue solver did not converge")]
    EigenFailure,
    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),
    #[error("lag coefficients must sum to zero, got {sum}")]
    ZeroSumViolated { sum: f64 },
    #[error("leading lag coefficient must be nonzero")]
    LeadingZero,
    #[error("invalid lag coefficients: {0}")]
    InvalidLag(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("state magnitude exceeded {limit:e} at step {step}")]
    Overflow { step: usize, limit: f64 },
    #[error("Gram matrix is singular or ill-conditioned (condition number {condition:e})")]
    SingularGram { condition: f64 },
    #[error("fourth moment {fourth} is below squared variance {variance_sq} at index {index}")]
    InvalidMoment { index: usize, fourth: f64, variance_sq: f64 },
    #[error("block construction of size {size} exceeds limit {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("adaptive quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("rate fit needs at least 3 points past burn-in, got {0}")]
    InsufficientPoints(usize),
    #[error("rate fit requires positive values, got {value} at T={t}")]
    NonPositiveValue { t: f64, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
