use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("block structure violated: {relation} (deviation {deviation:.3e} > tolerance {tolerance:.3e})")]
    BlockStructure {
        relation: &'static str,
        deviation: f64,
        tolerance: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("domain mismatch: expected {expected} domain")]
    DomainMismatch { expected: &'static str },

    #[error("singular kernel (condition number estimate {condition:.3e})")]
    SingularKernel { condition: f64 },

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid spectral density: {0}")]
    InvalidSpectralDensity(String),

    #[error("quadrature did not converge (error estimate {estimate:.3e}, target {target:.3e})")]
    Quadrature { estimate: f64, target: f64 },

    #[error("kernel is not time-translation invariant (Toeplitz deviation {0:.3e})")]
    NotToeplitz(f64),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("mass-shell singularity: retarded propagator vanishes at lag {tau}")]
    MassShell { tau: f64 },

    #[error("singular stroboscope matrix (smallest |eigenvalue| {smallest:.3e})")]
    SingularStroboscope { smallest: f64 },

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
