//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]. The `code` string is stable
//! and machine-parsable; the CLI prints it as a single-line prefix on stderr.

use crate::optimizer::OptimizationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("generator {index}: rho is not orthogonal (residual {residual:.3e})")]
    NonOrthogonalRho { index: usize, residual: f64 },

    #[error("group closure exceeded cap {cap}; generators do not generate a finite group")]
    GroupNotClosed { cap: usize },

    #[error("inconsistent time actions: {detail}")]
    InconsistentTau { detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("collisional configuration: min separation {min_separation:.3e} < {limit:.3e}")]
    CollisionalConfiguration { min_separation: f64, limit: f64 },

    #[error("collisional path at t = {time:.6}: min separation {min_separation:.3e} < {limit:.3e}")]
    CollisionalPath {
        time: f64,
        min_separation: f64,
        limit: f64,
    },

    #[error("equivariant subspace is trivial for this group and truncation")]
    DegenerateProjection,

    #[error("no convergence in {iterations} iterations (best gradient norm {gradient_norm:.3e})")]
    MaxIterations {
        iterations: usize,
        gradient_norm: f64,
        best: Box<(Vec<f64>, OptimizationReport)>,
    },

    #[error("line search stalled against the collision guard after {halvings} halvings")]
    CollisionStall { halvings: usize },

    #[error("Hessian solve failed with damping beyond {damping:.3e}")]
    SingularHessian { damping: f64 },

    #[error("gradient norm {gradient_norm:.3e} too large for Newton refinement (limit {limit:.3e})")]
    NotInBasin { gradient_norm: f64, limit: f64 },

    #[error("not a critical point: gradient/residual {residual:.3e} exceeds {limit:.3e}")]
    NotCritical { residual: f64, limit: f64 },

    #[error("matrix is not symmetric (residual {residual:.3e})")]
    NotSymmetric { residual: f64 },

    #[error("eigenvalue computation failed")]
    EigenFailure,

    #[error("integration produced non-finite values")]
    NonFiniteIntegration,

    #[error("fundamental path does not unfold continuously (joint mismatch {mismatch:.3e})")]
    DiscontinuousUnfold { mismatch: f64 },

    #[error("schema error: {context}")]
    SchemaError { context: String },

    #[error("permutation maps body {body_a} (mass {mass_a}) onto body {body_b} (mass {mass_b})")]
    MassOrbitMismatch {
        body_a: usize,
        mass_a: f64,
        body_b: usize,
        mass_b: f64,
    },

    #[error("unsupported format: {format}")]
    UnsupportedFormat { format: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used as the stderr prefix by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonOrthogonalRho { .. } => "NonOrthogonalRho",
            Error::GroupNotClosed { .. } => "GroupNotClosed",
            Error::InconsistentTau { .. } => "InconsistentTau",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::CollisionalConfiguration { .. } => "CollisionalConfiguration",
            Error::CollisionalPath { .. } => "CollisionalPath",
            Error::DegenerateProjection => "DegenerateProjection",
            Error::MaxIterations { .. } => "MaxIterations",
            Error::CollisionStall { .. } => "CollisionStall",
            Error::SingularHessian { .. } => "SingularHessian",
            Error::NotInBasin { .. } => "NotInBasin",
            Error::NotCritical { .. } => "NotCritical",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::EigenFailure => "EigenFailure",
            Error::NonFiniteIntegration => "NonFiniteIntegration",
            Error::DiscontinuousUnfold { .. } => "DiscontinuousUnfold",
            Error::SchemaError { .. } => "SchemaError",
            Error::MassOrbitMismatch { .. } => "MassOrbitMismatch",
            Error::UnsupportedFormat { .. } => "UnsupportedFormat",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
