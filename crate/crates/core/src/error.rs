//! Error type shared by all modules of the crate.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by solvers, model construction, reduction, and simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A matrix required to be stable has an eigenvalue with `Re >= 0`.
    NotStable { max_real_part: f64 },
    /// The Schur-based back-substitution hit a negligible pivot,
    /// which signals `lambda_i + lambda_j = 0` for some eigenvalue pair.
    SingularDecomposition,
    /// The Schur iteration itself failed to converge.
    SchurFailed,
    /// The fixed-point iteration reached its iteration cap with the
    /// residual still above tolerance.
    NoConvergence {
        iterations: usize,
        last_residual: f64,
    },
    /// Dense Kronecker operator would exceed the dimension cap.
    DimTooLarge { dim: usize, cap: usize },
    /// The Kronecker operator is singular: `0` lies in the spectrum of
    /// the combined Lyapunov operator.
    SingularOperator,
    /// Matrix dimensions are inconsistent.
    ShapeMismatch { what: String },
    /// An input matrix contains NaN or infinite entries.
    NonFinite { what: String },
    /// A matrix expected to be positive semidefinite has an eigenvalue
    /// below the allowed clip tolerance.
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },
    /// Input scaling factor outside `(0, 1]`.
    BadGamma { gamma: f64 },
    /// Invalid solver or algorithm parameters.
    InvalidOptions { what: String },
    /// The sampled check of the stability bound failed even after the
    /// shrink-and-retry fallback.
    VerificationFailed,
    /// Requested reduced order exceeds the numerical rank of the
    /// Gramian factor product.
    RankDeficient { requested: usize, achievable: usize },
    /// Trajectories to compare do not live on the same time grid.
    GridMismatch,
    /// State overflow during time integration (instability or too-large
    /// step size).
    NonFiniteState { time: f64 },
    /// Invalid benchmark specification.
    BadSpec { what: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotStable { max_real_part } => {
                write!(f, "matrix is not stable: max Re(lambda) = {max_real_part:e}")
            }
            Error::SingularDecomposition => {
                write!(f, "singular back-substitution pivot (lambda_i + lambda_j = 0)")
            }
            Error::SchurFailed => write!(f, "Schur decomposition did not converge"),
            Error::NoConvergence { iterations, last_residual } => write!(
                f,
                "fixed-point iteration did not converge after {iterations} iterations \
                 (last residual {last_residual:e})"
            ),
            Error::DimTooLarge { dim, cap } => {
                write!(f, "dimension {dim} exceeds the dense-operator cap {cap}")
            }
            Error::SingularOperator => write!(f, "Kronecker operator is singular"),
            Error::ShapeMismatch { what } => write!(f, "shape mismatch: {what}"),
            Error::NonFinite { what } => write!(f, "non-finite entries in {what}"),
            Error::NotPsd { min_eigenvalue, max_eigenvalue } => write!(
                f,
                "matrix is not positive semidefinite: lambda_min = {min_eigenvalue:e}, \
                 lambda_max = {max_eigenvalue:e}"
            ),
            Error::BadGamma { gamma } => {
                write!(f, "scaling factor {gamma} outside (0, 1]")
            }
            Error::InvalidOptions { what } => write!(f, "invalid options: {what}"),
            Error::VerificationFailed => {
                write!(f, "sampled verification of the stability bound failed")
            }
            Error::RankDeficient { requested, achievable } => write!(
                f,
                "requested order {requested} exceeds numerical rank; achievable order is {achievable}"
            ),
            Error::GridMismatch => write!(f, "trajectories have different time grids"),
            Error::NonFiniteState { time } => {
                write!(f, "state overflow at t = {time}")
            }
            Error::BadSpec { what } => write!(f, "invalid benchmark spec: {what}"),
        }
    }
}

impl core::error::Error for Error {}
