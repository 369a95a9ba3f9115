//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by the analytic formulas, the channel layer, and the
/// protocol simulator.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A configuration value is structurally invalid (zero antennas,
    /// non-positive SNR, empty grid, ...).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An input contained NaN or infinity where a finite value is required.
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    /// A formula was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Slope estimation could not proceed (too few usable points).
    #[error("slope estimation failed: {0}")]
    Estimation(String),

    /// An unbounded-deadline trial exceeded the configured stage cap.
    #[error("stage cap {cap} exceeded during an unbounded-deadline trial at rho={rho}")]
    StageCapExceeded { cap: u32, rho: f64 },

    /// An iterative numerical routine failed to converge.
    #[error("convergence failure in {0}")]
    Convergence(&'static str),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
