use thiserror::Error;

use crate::fibration::VerificationReport;

pub type Result<T> = std::result::Result<T, ForgeError>;

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The map has (or numerically nearly has) a real eigenvalue.
    #[error("real eigenvalue: min |Im λ| = {min_imag:e} (tolerance {tol:e})")]
    RealEigenvalue { min_imag: f64, tol: f64 },

    #[error("ill-conditioned computation: residual {residual:e} ({context})")]
    IllConditioned { residual: f64, context: &'static str },

    #[error("columns are rank deficient: smallest singular value {min_singular:e}")]
    RankDeficient { min_singular: f64 },

    #[error("plane is outside the chart domain: projection determinant {det:e}")]
    NotInChart { det: f64 },

    #[error("plane is not invariant under the complex structure: residual {residual:e}")]
    NotInvariant { residual: f64 },

    #[error("base is tangent to a bad cone at sample {index}: margin {margin:e}")]
    Tangency { index: usize, margin: f64 },

    #[error("subspace meets its conjugate: smallest singular value {min_singular:e}")]
    NotTransverse { min_singular: f64 },

    #[error("angle profiles differ by {max_diff:e} (tolerance {tol:e})")]
    Mismatch { max_diff: f64, tol: f64 },

    #[error("degenerate conjugate split at pair {index}: |Re v| = {real_norm:e}, |Im v| = {imag_norm:e}")]
    DegenerateSplit {
        index: usize,
        real_norm: f64,
        imag_norm: f64,
    },

    #[error("transversality margin is not positive: {value:e}")]
    NonPositiveMargin { value: f64 },

    #[error("bump exponent {required} exceeds cap {cap}")]
    ExponentOverflow { required: u64, cap: u64 },

    #[error("complex structure is not orthogonal: residual {residual:e}")]
    NotOrthogonal { residual: f64 },

    #[error("vector is not unit length: norm {norm}")]
    NotUnit { norm: f64 },

    #[error("germ is invalid: real eigenvalue of dh at radius {radius:e} (min |Im λ| = {min_imag:e})")]
    GermInvalid { radius: f64, min_imag: f64 },

    #[error("germ extension failed for every radius in the schedule ({attempts} attempts)")]
    ExtensionFailed {
        attempts: usize,
        best_report: Box<VerificationReport>,
    },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),
}
