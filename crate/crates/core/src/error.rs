use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unphysical Bloch vector: norm {norm} exceeds 1")]
    UnphysicalBloch { norm: f64 },

    #[error("Jones vector is not normalized: |h|^2 + |v|^2 = {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("Jones vector has zero norm")]
    ZeroJones,

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("matrix is not unitary: max |U^dag U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("frequency grid too narrow: spans {lower_sigmas:.2}/{upper_sigmas:.2} bandwidths below/above the center, need at least {required}")]
    GridTooNarrow {
        lower_sigmas: f64,
        upper_sigmas: f64,
        required: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid count record: {0}")]
    InvalidCounts(String),

    #[error("parameters are not identifiable: {0}")]
    Unidentifiable(String),

    #[error("optimizer failed: {0}")]
    FitFailed(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
