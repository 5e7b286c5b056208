use alloc::string::String;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no open channel at E = {energy}")]
    NoOpenChannel { energy: f64 },
    #[error("resolvent is singular at E = {energy} (pivot ratio {pivot_ratio:e})")]
    SingularResolvent { energy: f64, pivot_ratio: f64 },
    #[error("linear system is singular (pivot ratio {pivot_ratio:e})")]
    SingularSystem { pivot_ratio: f64 },
    #[error("energy lies on a band edge (sin k = {sin_k:e})")]
    BandEdge { sin_k: f64 },
    #[error("pole set has defective (coalescing) poles; use the resolvent path")]
    DefectivePoles,
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("root search did not converge (residual {residual:e})")]
    RootNotConverged { residual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
