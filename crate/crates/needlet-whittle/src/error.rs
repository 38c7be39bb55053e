//! Error type shared by all modules of this crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of window construction, sampling, estimation, and the
/// asymptotic-constant evaluators.
#[derive(Debug, Clone, Error)]
#[non_exhaustive]
pub enum Error {
    /// A scalar argument violates its documented domain.
    #[error("parameter `{name}` must satisfy {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },

    /// An input that must be finite was NaN or infinite.
    #[error("non-finite input: {what}")]
    NonFinite { what: &'static str },

    /// Adaptive quadrature hit its depth limit before reaching the tolerance.
    #[error(
        "quadrature did not converge: estimated error {achieved:.3e} exceeds tolerance {requested:.3e}"
    )]
    QuadratureDidNotConverge { achieved: f64, requested: f64 },

    /// The requested band contains no multipole with positive window weight.
    #[error("band j={j} contains no multipole with positive window weight")]
    EmptyBand { j: u32 },

    /// No band in the requested scale range is usable.
    #[error("no usable needlet band for j in {j_lo}..={j_hi}")]
    NoUsableBands { j_lo: u32, j_hi: u32 },

    /// A band needs multipoles beyond the available spectrum.
    #[error("band j={j} needs multipoles {need_lo}..={need_hi} but the spectrum covers {have_lo}..={have_hi}")]
    BandOutsideSpectrum {
        j: u32,
        need_lo: u32,
        need_hi: u32,
        have_lo: u32,
        have_hi: u32,
    },

    /// A spectrum model fails validation.
    #[error("invalid spectrum model: {reason}")]
    InvalidModel { reason: String },

    /// Every band power is zero, so the profile objective is undefined.
    #[error("all band powers are zero; the profile objective is undefined")]
    AllZeroPowers,

    /// Band powers and band decomposition do not describe the same bands.
    #[error("band powers cover {powers} bands but the decomposition has {decomp}")]
    MismatchedBands { powers: usize, decomp: usize },

    /// The narrow-band schedule leaves no admissible scale range.
    #[error("narrow-band schedule yields J1={j1} outside 0..={j_max} (J_L={j_l})")]
    DegenerateNarrowBand { j1: i64, j_max: u32, j_l: u32 },

    /// A statistical routine received fewer observations than it supports.
    #[error("sample size {n} outside the supported range {min}..={max}")]
    SampleSizeOutOfRange { n: usize, min: usize, max: usize },

    /// A statistical routine received a sample with zero variance.
    #[error("sample has zero variance")]
    ZeroVarianceSample,

    /// Not enough successful replications to form the requested summary.
    #[error("insufficient data: {what}")]
    InsufficientData { what: String },

    /// An estimator name failed to parse.
    #[error("unknown estimator `{name}`; expected needlet-full, needlet-narrow, fourier-full, or fourier-narrow")]
    UnknownEstimator { name: String },
}
