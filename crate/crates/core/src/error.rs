use thiserror::Error;

use crate::smoothness::PgaTrace;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("symmetric eigensolver did not converge")]
    EigenNoConvergence,

    #[error("requested {count} eigenpairs from a {dim}x{dim} matrix")]
    CountExceedsDim { count: usize, dim: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid simplex weights: {0}")]
    InvalidWeights(String),

    #[error("invalid affinity matrix: {0}")]
    InvalidAffinity(String),

    #[error("kernel width must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("local bandwidth of sample {index} is degenerate ({sigma:e})")]
    DegenerateBandwidth { index: usize, sigma: f64 },

    #[error("isolated nodes (zero degree): {indices:?}")]
    IsolatedNode { indices: Vec<usize> },

    #[error("view {view} collapsed at iteration {iteration}: isolated nodes {indices:?}")]
    ViewCollapsed {
        view: usize,
        iteration: usize,
        indices: Vec<usize>,
    },

    #[error("unknown block-matrix recipe {0} (expected 1..=4)")]
    UnknownRecipe(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cluster {0} is empty after size rounding")]
    EmptyCluster(usize),

    #[error("zero mode is ambiguous: lambda_1 = {lambda1:e} (disconnected combination)")]
    ZeroModeAmbiguity { lambda1: f64 },

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize, partial: Box<PgaTrace> },

    #[error("embedding columns are not orthonormal (defect {0:e})")]
    NonOrthonormalEmbedding(f64),

    #[error("initial basis is not orthogonal (defect {0:e})")]
    NonOrthogonalInit(f64),

    #[error("cluster stayed empty after {0} re-seeding attempts")]
    EmptyClusterRestart(usize),

    #[error("row {row} of view {view} has zero norm")]
    ZeroNormRow { view: usize, row: usize },

    #[error("k = {k} exceeds sample count n = {n}")]
    KExceedsN { k: usize, n: usize },

    #[error("label vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("all {trials} trials failed; first error: {first}")]
    AllTrialsFailed { trials: usize, first: Box<Error> },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            InvalidConfig(_)
            | UnknownRecipe(_)
            | CountExceedsDim { .. }
            | KExceedsN { .. }
            | NonPositiveSigma(_)
            | NonOrthogonalInit(_) => ErrorKind::Config,
            NonFinite(_)
            | DimensionMismatch { .. }
            | NotSquare { .. }
            | InvalidWeights(_)
            | InvalidAffinity(_)
            | IsolatedNode { .. }
            | LengthMismatch { .. }
            | InvalidLabels(_)
            | ZeroNormRow { .. }
            | Format(_)
            | Io(_)
            | Csv(_)
            | Json(_) => ErrorKind::Data,
            EigenNoConvergence
            | DegenerateBandwidth { .. }
            | ViewCollapsed { .. }
            | EmptyCluster(_)
            | ZeroModeAmbiguity { .. }
            | NonFiniteObjective { .. }
            | NonOrthonormalEmbedding(_)
            | EmptyClusterRestart(_) => ErrorKind::Numerical,
            AllTrialsFailed { first, .. } => first.kind(),
        }
    }
}
