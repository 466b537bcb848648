use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants that carry indices refer to the caller's
/// input order (vertices) or to stable facet ids of the ball in question.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("vertex set is not symmetric: no antipode for vertex {index}")]
    NotSymmetric { index: usize },
    #[error("vertex set does not span dimension {dim} (rank {rank})")]
    NotFullDimensional { dim: usize, rank: usize },
    #[error("vertex {index} is not an extreme point of the hull")]
    RedundantVertex { index: usize },
    #[error("dimension {dim} is not supported (need at least 2)")]
    UnsupportedDimension { dim: usize },
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,
    #[error("point is not on the unit sphere of this ball")]
    NotOnSphere,
    #[error("point has more than one active facet, no unique support functional")]
    NotSmoothPoint,
    #[error("direction does not keep the base point on the sphere")]
    NotTangentDirection,
    #[error("map evaluator failed: {reason}")]
    EvaluatorFailure { reason: String },
    #[error("rejection sampler exhausted its budget of {budget} draws")]
    SamplingExhausted { budget: usize },
    #[error("limit sequence did not stabilize within the schedule")]
    NoStabilization,
    #[error("direction pairs admit no single linear map (worst defect {defect})")]
    InconsistentPairs { defect: String },
    #[error("transports were built at different base points")]
    BasePointMismatch,
    #[error("vector lies outside the span the transport was built on")]
    SpanViolation,
    #[error("sample points for facet {facet} are not linearly independent")]
    SingularSampleSet { facet: usize },
    #[error("recovered matrix fails verification on facet {facet} samples")]
    VerificationFailed { facet: usize },
    #[error("no piece recorded for facet {facet}")]
    MissingPiece { facet: usize },
    #[error("support spans have different dimensions ({source_dim} vs {target_dim})")]
    SupportSpanMismatch { source_dim: usize, target_dim: usize },
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Validation(String),
}
