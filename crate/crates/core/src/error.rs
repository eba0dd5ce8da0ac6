use thiserror::Error;

/// Errors raised by state construction, field evaluation and cell bookkeeping.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation before any numerics ran.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Fock index outside the truncated basis.
    #[error("Fock index {index} out of range: basis holds 0..{cutoff}")]
    IndexOutOfRange { index: usize, cutoff: usize },

    /// The truncated basis misses more weight than the trace tolerance allows.
    #[error("truncation weight {tail:.3e} exceeds tolerance {tol:.1e}; need fock_cutoff >= {required}")]
    Truncation { tail: f64, tol: f64, required: usize },

    /// A density matrix violated one of its invariants.
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    /// A computed field or quantity failed an internal consistency check.
    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),

    /// A quadrature did not reach its requested accuracy.
    #[error("quadrature did not converge: residual {residual:.3e} ({context})")]
    Quadrature { residual: f64, context: String },

    /// A phase-space cell smaller than hbar/2 was requested.
    #[error("cell measure {measure:.6e} is below the quantum bound hbar/2 = {bound:.6e}")]
    SubQuantumCell { measure: f64, bound: f64 },

    /// A cell or partition does not fit the sampling grid, or misses state mass.
    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that come from numerical tolerances rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Truncation { .. }
                | Error::Inconsistent(_)
                | Error::Quadrature { .. }
                | Error::Coverage(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
