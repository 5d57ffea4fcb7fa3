//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while validating models or running the
/// spectral pipeline. Each variant corresponds to a distinct failure mode
/// and maps to its own exit code in the CLI.
#[derive(Debug, Clone, Error)]
pub enum Error {
    // ---- model validation ----
    #[error("edge {index} ({from} -> {to}, shift {shift:?}): adjoint edge missing or weight not conjugate")]
    MissingAdjointEdge {
        index: usize,
        from: String,
        to: String,
        shift: Vec<i64>,
    },
    #[error("quotient graph is not connected ({reachable} of {total} vertices reachable)")]
    DisconnectedQuotient { reachable: usize, total: usize },
    #[error("edge {index}: weight {weight} invalid in Perron mode (must be a strictly negative real)")]
    BadSign { index: usize, weight: String },
    #[error("direction undefined: h(x) = h(y)")]
    ZeroDisplacement,
    #[error("model error: {0}")]
    BadModel(String),

    // ---- band sampling / edge location ----
    #[error("eigensolver failed to converge: {0}")]
    EigFailure(String),
    #[error("no spectral gap adjacent to band {band} on the {side} side")]
    NoGap { band: usize, side: String },
    #[error("eigenvalue at band edge is not simple: gap to nearest neighbor {gap:.3e} < {tol:.3e}")]
    DegenerateEdge { gap: f64, tol: f64 },
    #[error("band edge Hessian is not positive definite (min eigenvalue {min_eig:.3e})")]
    NonConvexEdge { min_eig: f64 },
    #[error("assumption {name} violated (margin {margin:.3e})")]
    AssumptionViolated { name: String, margin: f64 },

    // ---- analytic continuation ----
    #[error("branch collision at beta = {beta:?}: eigenvalue separation {separation:.3e}")]
    BranchCollision { beta: Vec<f64>, separation: f64 },
    #[error("continued eigenvalue is not real at beta = {beta:?}: |Im E| = {imag:.3e}")]
    ComplexBranch { beta: Vec<f64>, imag: f64 },
    #[error("eigenvector pairing degenerate: |F| = {pairing:.3e}")]
    PairingDegenerate { pairing: f64 },
    #[error("level-set solve left the continuation region: {0}")]
    OutOfRegion(String),
    #[error("Newton damping exhausted (residual {residual:.3e})")]
    NoDescent { residual: f64 },

    // ---- asymptotic evaluation ----
    #[error("pair direction {actual:?} does not match solved direction {expected:?}")]
    DirectionMismatch { expected: Vec<f64>, actual: Vec<f64> },
    #[error("deck rank d = {d} too low: {context}")]
    DimensionTooLow { d: usize, context: String },

    // ---- oracles ----
    #[error("lambda = {lambda} lies on the spectrum (min singular value {sigma_min:.3e} at a quadrature node)")]
    OnSpectrum { lambda: f64, sigma_min: f64 },
    #[error("quadrature budget exceeded: m = {m} reached without convergence (rel change {rel_change:.3e})")]
    Budget { m: usize, rel_change: f64 },
    #[error("truncated operator is indefinite: lambda = {lambda} inside the spectrum")]
    Indefinite { lambda: f64 },
    #[error("sparse solver failed: {0}")]
    SolverFailure(String),
    #[error("edge-limit extrapolation fit residual {residual:.3e} exceeds {tol:.3e}")]
    PoorFit { residual: f64, tol: f64 },

    // ---- Perron / Martin ----
    #[error("quotient graph is not strongly connected; Perron theory unavailable")]
    Reducible,
    #[error("maximization of the Perron dispersion did not converge (|grad| = {grad_norm:.3e})")]
    NoConvergence { grad_norm: f64 },

    // ---- model files ----
    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable code, one per failure mode.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingAdjointEdge { .. } => "MissingAdjointEdge",
            Error::DisconnectedQuotient { .. } => "DisconnectedQuotient",
            Error::BadSign { .. } => "BadSign",
            Error::ZeroDisplacement => "ZeroDisplacement",
            Error::BadModel(_) => "BadModel",
            Error::EigFailure(_) => "EigFailure",
            Error::NoGap { .. } => "NoGap",
            Error::DegenerateEdge { .. } => "DegenerateEdge",
            Error::NonConvexEdge { .. } => "NonConvexEdge",
            Error::AssumptionViolated { .. } => "AssumptionViolated",
            Error::BranchCollision { .. } => "BranchCollision",
            Error::ComplexBranch { .. } => "ComplexBranch",
            Error::PairingDegenerate { .. } => "PairingDegenerate",
            Error::OutOfRegion(_) => "OutOfRegion",
            Error::NoDescent { .. } => "NoDescent",
            Error::DirectionMismatch { .. } => "DirectionMismatch",
            Error::DimensionTooLow { .. } => "DimensionTooLow",
            Error::OnSpectrum { .. } => "OnSpectrum",
            Error::Budget { .. } => "Budget",
            Error::Indefinite { .. } => "Indefinite",
            Error::SolverFailure(_) => "SolverFailure",
            Error::PoorFit { .. } => "PoorFit",
            Error::Reducible => "Reducible",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::Schema { .. } => "SchemaError",
            Error::Io { .. } => "IOError",
        }
    }
}
