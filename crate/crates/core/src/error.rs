use thiserror::Error;

/// Failure modes shared across the laboratory.
///
/// Every variant carries a human-readable message naming the violated
/// precondition or the quantity that failed to converge; callers match on
/// the variant to decide between "bad input" and "numerics gave up".
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// An integral or refinement ladder failed to settle below tolerance.
    #[error("divergence error: {0}")]
    Divergence(String),

    /// An iteration (Newton, CG, extrapolation) did not converge.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// A quantity that must stay away from zero degenerated.
    #[error("degenerate error: {0}")]
    Degenerate(String),

    /// A linear system or projection was too ill-conditioned to trust.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// Floating-point breakdown: NaN/Inf where a finite value is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A structural invariant of a result failed its self-check.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A polynomial extraction produced mass where none is allowed.
    #[error("extraction error: {0}")]
    Extraction(String),

    /// Malformed or inconsistent run configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn divergence(msg: impl Into<String>) -> Self {
        Error::Divergence(msg.into())
    }
    pub fn convergence(msg: impl Into<String>) -> Self {
        Error::Convergence(msg.into())
    }
    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
    pub fn conditioning(msg: impl Into<String>) -> Self {
        Error::Conditioning(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn extraction(msg: impl Into<String>) -> Self {
        Error::Extraction(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
