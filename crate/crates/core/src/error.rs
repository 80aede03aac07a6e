//! Error type shared by all solver modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Chain description violates one or more invariants; every violation is
    /// listed.
    #[error("invalid chain description: {}", .0.join("; "))]
    InvalidChain(Vec<String>),

    #[error("matrix of size {size} is singular at pivot {pivot}")]
    SingularMatrix { size: usize, pivot: usize },

    #[error("eigenvalue iteration failed to converge for size {size}")]
    EigenFailure { size: usize },

    #[error(
        "Lyapunov operator is singular (closest eigenvalue pair sum {min_pair_sum:.3e}); \
         the drift sits on a stability boundary"
    )]
    SingularSylvester { min_pair_sum: f64 },

    #[error("fixed-point iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("drift Jacobian is singular; the working point sits exactly on an instability")]
    SingularJacobian,

    #[error("series did not converge within {max_terms} terms (last relative term {last_term:.3e})")]
    SeriesDivergence { max_terms: usize, last_term: f64 },

    #[error("trajectory diverged (non-finite state) at step {step}; reduce the time step")]
    TrajectoryDiverged { step: usize },

    #[error("filter window [{start}, {end}) is outside the simulated span {span}")]
    FilterOutOfRange { start: f64, end: f64, span: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("covariance matrix is not a valid quantum covariance: {reason}")]
    InvalidCovariance { reason: String },

    #[error("Fock cutoff too small: tail population {tail:.3e} on mode {mode} exceeds {limit:.1e}")]
    CutoffTail { mode: usize, tail: f64, limit: f64 },

    #[error("contour {target:.4} not found inside the search box")]
    ContourNotFound { target: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Config(String),
}
