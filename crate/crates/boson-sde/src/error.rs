use thiserror::Error;

/// Errors produced by the numeric layers of the library.
///
/// Config-file handling has its own richer error type in [`crate::config`];
/// everything numeric funnels through this one.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{context}: matrix is not Hermitian (max deviation {deviation:.3e} exceeds {tolerance:.3e})")]
    NotHermitian {
        context: &'static str,
        deviation: f64,
        tolerance: f64,
    },

    #[error("{context}: matrix is not symmetric (max deviation {deviation:.3e} exceeds {tolerance:.3e})")]
    NotSymmetric {
        context: &'static str,
        deviation: f64,
        tolerance: f64,
    },

    #[error("{context}: matrix is not positive semi-definite (eigenvalue {eigenvalue:.3e})")]
    NotPositiveSemidefinite {
        context: &'static str,
        eigenvalue: f64,
    },

    #[error("{context}: state has zero norm, drift is singular")]
    ZeroState { context: &'static str },

    #[error("{context}: vector norm {norm} is not within {tolerance:.1e} of 1")]
    NotUnitNorm {
        context: &'static str,
        norm: f64,
        tolerance: f64,
    },

    #[error("{context}: precondition violated: {detail}")]
    Precondition {
        context: &'static str,
        detail: String,
    },

    #[error("Fock basis for n={bosons}, N={modes} has dimension {dim}, above the cap {cap}")]
    ResourceLimit {
        bosons: usize,
        modes: usize,
        dim: usize,
        cap: usize,
    },

    #[error("integration accuracy failure in {context}: {detail} (try a smaller dt)")]
    IntegrationAccuracy {
        context: &'static str,
        detail: String,
    },

    #[error("{context}: ensemble snapshot is empty")]
    EmptyEnsemble { context: &'static str },

    #[error("eigensolver failed to converge after {sweeps} sweeps")]
    EigConvergence { sweeps: usize },

    #[error("{context}: invalid parameter: {detail}")]
    InvalidParameter {
        context: &'static str,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
