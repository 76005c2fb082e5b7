//! Crate-wide error type.

/// Errors raised across the analysis pipeline.
///
/// Variants are grouped by the subsystem that raises them; the CLI maps
/// configuration problems to exit code 1 and everything numerical to
/// exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Distribution parameters violate family constraints (σ ≤ 0, a ≥ b, ...).
    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),

    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Numerical quadrature failed to converge.
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    /// Regression matrix is rank deficient; shrink the basis or enlarge the design.
    #[error("rank-deficient information matrix: {0}")]
    RankDeficient(String),

    /// A leave-one-out hat-matrix diagonal reached 1 (interpolating row).
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// Validation responses carry no variance.
    #[error("degenerate validation set: response variance is zero")]
    DegenerateValidation,

    /// All relevant expansion coefficients vanish; Sobol' ratios are undefined.
    #[error("zero variance: no non-constant contribution on the requested dimensions")]
    ZeroVariance,

    /// The global optimizer never saw a finite objective value.
    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    /// A base design point admits no feasible phantom replicate anywhere in the θ box.
    #[error("infeasible base point: run {run_id} admits no phantom replicate")]
    InfeasibleBase { run_id: usize },

    /// Truss stiffness matrix is singular after applying supports.
    #[error("singular stiffness matrix: {0}")]
    SingularStiffness(String),

    /// Model registry lookup failed.
    #[error("unknown model: {0}")]
    UnknownModel(String),

    /// Configuration file is missing, unreadable, or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
