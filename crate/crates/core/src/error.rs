use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vectors that must share a length do not.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A scenario field violates its invariant.
    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: &'static str, reason: String },

    /// No antenna position vector can satisfy spacing and aperture together.
    #[error("infeasible aperture: ({n} - 1) * {min_spacing} > {aperture}")]
    InfeasibleAperture {
        n: usize,
        min_spacing: f64,
        aperture: f64,
    },

    /// A caller-supplied subproblem breaks its convexity contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The numerical solver failed in a way the caller cannot recover from.
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
