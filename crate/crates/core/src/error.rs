use serde::Serialize;
use thiserror::Error;

/// A single constraint that a candidate distance matrix fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum MetricViolation {
    NonZeroDiagonal { i: usize, value: f64 },
    Asymmetry { i: usize, j: usize, diff: f64 },
    NegativeDistance { i: usize, j: usize, value: f64 },
    ZeroOffDiagonal { i: usize, j: usize },
    /// `dist[i][j] > dist[i][k] + dist[k][j]` by `slack`.
    TriangleViolation { i: usize, j: usize, k: usize, slack: f64 },
}

impl std::fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NonZeroDiagonal { i, value } => write!(f, "NonZeroDiagonal({i}) = {value}"),
            Self::Asymmetry { i, j, diff } => write!(f, "AsymmetryError({i},{j}) diff {diff}"),
            Self::NegativeDistance { i, j, value } => {
                write!(f, "NegativeDistanceError({i},{j}) = {value}")
            }
            Self::ZeroOffDiagonal { i, j } => write!(f, "ZeroOffDiagonal({i},{j})"),
            Self::TriangleViolation { i, j, k, slack } => {
                write!(f, "TriangleViolation({i},{j},{k}) slack {slack}")
            }
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Serialize)]
#[serde(tag = "error")]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} entries")]
    NotSquare { rows: usize, row: usize, cols: usize },

    #[error("non-finite entry at ({i},{j})")]
    NonFinite { i: usize, j: usize },

    #[error("invalid metric: {} violation(s), first: {}", .total, .violations.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidMetric {
        violations: Vec<MetricViolation>,
        /// Total count; `violations` may be truncated.
        total: usize,
    },

    #[error("index {index} is in neither side of the partition")]
    Coverage { index: usize },

    #[error("partition side {side} is empty")]
    EmptySide { side: String },

    #[error("index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("points {i} and {j} are mapped to the same vector")]
    CollapsedPair { i: usize, j: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("matrix not symmetric at ({i},{j}): |diff| = {diff}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("eigensolver did not converge within {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("space is not Euclidean: Gram matrix has eigenvalue {min_eigenvalue}")]
    NotEuclidean { min_eigenvalue: f64 },

    #[error("Lipschitz certificate violated at ({i},{j}): ratio {ratio} > bound {bound}")]
    CertificateViolation { i: usize, j: usize, ratio: f64, bound: f64 },

    #[error("extension solver stalled at objective {objective} (target {target}) after {iterations} iterations")]
    SolverStall { objective: f64, target: f64, iterations: usize },

    #[error("evaluation point duplicates source {index} but requires a different target")]
    InconsistentDuplicate { index: usize },

    #[error("input embedding of side {side} violates its bounds: contraction {contraction}, expansion {expansion}, allowed {bound}")]
    InputDistortion { side: String, contraction: f64, expansion: f64, bound: f64 },

    #[error("audit {name} failed at {witness:?}: measured {measured}, bound {bound}")]
    AuditViolation { name: String, witness: Option<(usize, usize)>, measured: f64, bound: f64 },

    #[error("duplicate edge ({u},{v})")]
    DuplicateEdge { u: usize, v: usize },

    #[error("self loop at vertex {v}")]
    SelfLoop { v: usize },

    #[error("singular pencil: subgraph {graph} is disconnected")]
    SingularPencil { graph: usize },

    #[error("no acceptable split after {attempts} attempts")]
    RetryBudgetExceeded { attempts: usize },

    #[error("{which} = {measured} outside [{lo}, {hi}]")]
    RangeViolation { which: String, measured: f64, lo: f64, hi: f64 },

    #[error("images have zero energy over the edge set")]
    DegenerateImages,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable variant name used in structured CLI output.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::NonFinite { .. } => "NonFinite",
            Error::InvalidMetric { .. } => "InvalidMetric",
            Error::Coverage { .. } => "CoverageError",
            Error::EmptySide { .. } => "EmptySideError",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::CollapsedPair { .. } => "CollapsedPairError",
            Error::LengthMismatch { .. } => "LengthMismatchError",
            Error::NotSymmetric { .. } => "NotSymmetricError",
            Error::Convergence { .. } => "ConvergenceError",
            Error::NotEuclidean { .. } => "NotEuclidean",
            Error::CertificateViolation { .. } => "CertificateViolation",
            Error::SolverStall { .. } => "SolverStall",
            Error::InconsistentDuplicate { .. } => "InconsistentDuplicate",
            Error::InputDistortion { .. } => "InputDistortionError",
            Error::AuditViolation { .. } => "AuditViolation",
            Error::DuplicateEdge { .. } => "DuplicateEdge",
            Error::SelfLoop { .. } => "SelfLoop",
            Error::SingularPencil { .. } => "SingularPencil",
            Error::RetryBudgetExceeded { .. } => "RetryBudgetExceeded",
            Error::RangeViolation { .. } => "RangeViolation",
            Error::DegenerateImages => "DegenerateImages",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
