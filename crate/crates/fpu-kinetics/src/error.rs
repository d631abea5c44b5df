//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong in the library.
///
/// Numerical routines report *achieved* accuracy on failure so callers can
/// decide whether a degraded answer is still useful.
#[derive(Debug, Error)]
pub enum Error {
    /// A kernel was evaluated on (or too close to) its singular set.
    /// Pointwise evaluation is meaningless there; the caller must switch to
    /// cell-integrated quadrature.
    #[error("kernel evaluation at ({x:.6e}, {y:.6e}) is singular: {what}")]
    SingularEvaluation { x: f64, y: f64, what: &'static str },

    /// An adaptive quadrature exhausted its budget before reaching the
    /// requested tolerance. The best value and its achieved error estimate
    /// are reported.
    #[error(
        "quadrature did not converge: value {value:.16e}, achieved error {achieved:.3e} (requested {requested:.3e})"
    )]
    QuadratureNonConvergence {
        value: f64,
        achieved: f64,
        requested: f64,
    },

    /// A root bracketing assumption was violated. This contradicts the
    /// analytic structure of the collision kernel and indicates an internal
    /// bug rather than a user error.
    #[error("internal error: root bracketing violated for x = {x:.16e} ({detail})")]
    BracketingViolated { x: f64, detail: &'static str },

    /// A Galerkin cell integral failed to converge during operator assembly.
    #[error(
        "assembly failure in cell ({row}, {col}): integral did not converge (achieved {achieved:.3e})"
    )]
    AssemblyFailure {
        row: usize,
        col: usize,
        achieved: f64,
    },

    /// Grid construction was asked for an unusable size.
    #[error("invalid grid size {n}: {why}")]
    InvalidGridSize { n: usize, why: &'static str },

    /// A parity split was requested on a grid that is not mirror-symmetric.
    #[error("grid is not parity-symmetric: node {index} fails x + x' = 2π by {defect:.3e}")]
    NotParitySymmetric { index: usize, defect: f64 },

    /// The symmetric eigensolver did not converge.
    #[error("eigensolver did not converge for a {dim}×{dim} matrix")]
    EigenNonConvergence { dim: usize },

    /// The regularized-collision oracle was asked for a parameter combination
    /// whose cubic cost is prohibitive.
    #[error(
        "oracle cost guard: eps = {eps:.3e} with tol = {tol:.3e} refused (eps < 1e-5 requires tol ≥ 1e-4)"
    )]
    OracleCostGuard { eps: f64, tol: f64 },

    /// A power-law fit was requested on ill-posed data.
    #[error("power-law fit rejected: {why}")]
    FitRejected { why: String },

    /// Equilibrium rejection sampling stalled (acceptance below 1e-3).
    #[error("equilibrium sampler stalled: acceptance {acceptance:.3e} after {proposals} proposals")]
    SamplerStall { acceptance: f64, proposals: u64 },

    /// Bad run configuration (CLI or config file).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Usage error: unknown flag, missing value, unknown subcommand.
    #[error("usage error: {0}")]
    Usage(String),

    /// A persisted operator file failed to parse.
    #[error("bad operator file: {0}")]
    BadOperatorFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
