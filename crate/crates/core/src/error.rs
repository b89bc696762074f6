//! Error taxonomy shared by all modules.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants mirror how failures arise: `Validation` for rejected inputs at
/// construction time, `Domain` for evaluation outside an operation's domain
/// (kernel singularity, zero frequency, cutoff violations), `Numerical` for
/// convergence failures with the achieved residual in the message,
/// `InvariantViolation` for converged results that break a structural
/// guarantee, and `Config` for missing metadata.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
