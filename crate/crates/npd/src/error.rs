//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building states, applying operators,
/// stepping in time, or doing I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A field contained NaN or infinite samples where finite data is required.
    #[error("invalid field: {0}")]
    InvalidField(String),

    /// An operator requiring mean-zero input received a field with a
    /// nonvanishing zero mode.
    #[error("mean-zero violation in {context}: |mean| = {mean:.3e} exceeds tolerance {tol:.3e}")]
    MeanZeroViolation {
        context: &'static str,
        mean: f64,
        tol: f64,
    },

    /// Initial data cannot satisfy (or a state has lost) global
    /// electroneutrality.
    #[error("charge compatibility violation: {0}")]
    Compatibility(String),

    /// Two fields on different grids were combined.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An L^p norm was requested for an unsupported exponent.
    #[error("unsupported L^p exponent {0}; supported: 1, 2, 3, 4, 6, inf")]
    UnsupportedExponent(f64),

    /// A diagnostic received a state outside its domain of validity.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Entropy normalisation by a zero-mass field.
    #[error("zero mass: exponential entropy undefined")]
    ZeroMass,

    /// Concentrations dipped below the configured negativity floor,
    /// signalling under-resolution.
    #[error("positivity abort at t = {time:.6}, step {step}: min c_{species} = {min_value:.3e} below floor {floor:.3e}")]
    PositivityAbort {
        time: f64,
        step: u64,
        species: usize,
        min_value: f64,
        floor: f64,
    },

    /// Non-finite values appeared during time stepping.
    #[error("blow-up detected at t = {time:.6}, step {step}: {details}")]
    BlowUp {
        time: f64,
        step: u64,
        details: String,
    },

    /// Configuration rejected at load time.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Regression input outside the fit's domain.
    #[error("fit error: {0}")]
    Fit(String),

    /// Malformed time-series or checkpoint file.
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    /// One or more verification gates failed in `check`.
    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
