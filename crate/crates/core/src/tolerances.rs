//! Numerical tolerances shared across the crate.
//!
//! Every threshold that decides a check, a warning or a tie lives here so
//! precision can be tuned in one place.

/// Frobenius defect allowed in `X^T X - I` for an orthonormal block.
pub const ORTHONORMALITY: f64 = 1e-10;

/// Relative eigen-residual `‖A v − λ v‖ / max(1, ‖A‖)`.
pub const EIGEN_RESIDUAL: f64 = 1e-8;

/// Allowed deviation of simplex weights from summing to one.
pub const SIMPLEX_SUM: f64 = 1e-12;

/// Below this, `λ_1` of a combination counts as a second zero mode.
pub const ZERO_MODE: f64 = 1e-10;

/// Gap `λ_{k+1} − λ_k` under which a trial is flagged.
pub const TRIAL_SPECTRAL_GAP: f64 = 1e-10;

/// Gap under which the analytic gradient is averaged over the eigenspace.
pub const GRADIENT_SPECTRAL_GAP: f64 = 1e-8;

/// Trials whose objectives differ by less than this are tied.
pub const OBJECTIVE_TIE: f64 = 1e-12;

/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_FLOOR: f64 = -1e-9;

/// Slack on the upper bound 2 of the normalized Laplacian spectrum.
pub const NORMALIZED_SPECTRUM_CEILING: f64 = 2.0 + 1e-9;

/// Eigenvalues below this count toward the zero-mode multiplicity.
pub const ZERO_EIGENVALUE: f64 = 1e-8;

/// Relative floor for self-tuning bandwidths, scaled by the feature spread.
pub const BANDWIDTH_CLAMP: f64 = 1e-12;

/// Absolute minimum for a self-tuning bandwidth after clamping.
pub const BANDWIDTH_MIN: f64 = 1e-12;

/// Orthogonality defect accepted for a user-supplied joint-diagonalization basis.
pub const INIT_ORTHOGONALITY: f64 = 1e-8;

/// Orthonormality defect accepted by the worst-case smoothness evaluator.
pub const EMBEDDING_ORTHONORMALITY: f64 = 1e-8;
