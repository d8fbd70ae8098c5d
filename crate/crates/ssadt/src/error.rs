//! Error taxonomy shared across the crate.
//!
//! Variants map onto the CLI exit-code contract: configuration and domain
//! problems exit 2, an infeasible budget exits 3, and numerical failures
//! (overflow, ill-conditioning, optimization breakdown) exit 4.

use thiserror::Error;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Configuration file or option set rejected before any computation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An argument lies outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request is structurally valid but outside the supported model
    /// class (e.g. a stress specification with more than two levels).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// No test plan fits within the budget.
    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),

    /// A computation produced a non-finite or otherwise unusable value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The information matrix for a plan is singular or not positive
    /// definite, so the asymptotic variance is undefined there.
    #[error("ill-conditioned information matrix for plan {plan}")]
    Conditioning {
        /// Human-readable `(n, f, M, omega1)` description of the plan.
        plan: String,
    },

    /// Every optimizer start failed to converge; the best point seen is
    /// carried so callers can still report it.
    #[error("optimization failed: {message} (best log-likelihood {best_loglik})")]
    OptimizationFailure {
        /// What went wrong.
        message: String,
        /// Best parameter vector `(a, b, beta)` found before giving up.
        best_theta: [f64; 3],
        /// Log-likelihood at `best_theta`.
        best_loglik: f64,
    },

    /// Filesystem problem while reading inputs or writing reports.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI contract: 2 invalid input, 3
    /// infeasible budget, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Io(_) => 2,
            Error::InfeasibleBudget(_) => 3,
            Error::Numerical(_)
            | Error::Conditioning { .. }
            | Error::OptimizationFailure { .. } => 4,
        }
    }
}
