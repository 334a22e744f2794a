use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh parameter: {0}")]
    InvalidMeshParameter(String),

    #[error("degenerate triangle {index} (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("mesh is not conforming: {0}")]
    NonConforming(String),

    #[error("bisection closure did not terminate after {sweeps} sweeps")]
    ClosureDiverged { sweeps: usize },

    #[error("triangle index {index} out of range (mesh has {count} triangles)")]
    TriangleOutOfRange { index: usize, count: usize },

    #[error("level {level} out of range (hierarchy has {count} levels)")]
    LevelOutOfRange { level: usize, count: usize },

    #[error("level mismatch: expected level {expected}, got {got}")]
    LevelMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("zero vector passed to {0}")]
    ZeroVector(&'static str),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("eigensolver residual {residual:e} exceeds bound {bound:e}")]
    InaccurateEigenpair { residual: f64, bound: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNotConverged { iterations: usize, residual: f64 },

    #[error("multigrid diverged: residual grew for 3 consecutive cycles (last {residual:e})")]
    MultigridDiverged { residual: f64 },

    #[error("multigrid stopped after {cycles} cycles at relative residual {rel_residual:e}")]
    MultigridNotConverged { cycles: usize, rel_residual: f64 },

    #[error("correction space is rank deficient: {0}")]
    RankDeficient(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
