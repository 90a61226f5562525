//! Error type shared across the crate.

/// Errors produced by mesh construction, assembly, solves, and diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum WaveError {
    /// A constructor or routine was handed an argument outside its contract
    /// (zero degree, too few elements, non-positive tolerance, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An evaluation point fell outside the parameter domain of a basis.
    #[error("point {point} outside parameter domain [{start}, {end}]")]
    OutsideDomain { point: f64, start: f64, end: f64 },

    /// Mismatched dimensions between operators, vectors, or meshes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An iterative solve failed to reach the requested tolerance. The best
    /// iterate and its true relative residual are preserved so callers can
    /// inspect (or accept) the partial result.
    #[error("solver stalled after {iterations} iterations (residual {residual:.3e})")]
    SolverStall {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    /// A diagnostic routine could not extract the requested quantity
    /// (too few zero crossings, too few samples for a rate fit, ...).
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),
}

pub type Result<T> = std::result::Result<T, WaveError>;
