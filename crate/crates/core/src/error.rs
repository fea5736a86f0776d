use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are split into numerical failures ([`Error::is_numerical`]) and
/// input problems so a front end can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit parameter: {0}")]
    InvalidParameter(String),
    #[error("misaligned sampling grid: {0}")]
    MisalignedGrid(String),
    #[error("stride misalignment: prediction length {m} is not a multiple of sample count {n}")]
    StrideMisalignment { m: usize, n: usize },
    #[error("unknown case id {0} (expected 1..=6)")]
    UnknownCase(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("steady state did not converge after {cycles} switching cycles")]
    NoConvergence { cycles: usize },
    #[error("trajectory diverged at step {step} (|x| > {limit:e})")]
    Divergence { step: usize, limit: f64 },
    #[error("every training epoch diverged; check the nominal parameter scales")]
    AllDivergent,
    #[error("finite-difference step underflow for parameter {index}")]
    StepUnderflow { index: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("eigenvalue spectrum is identically zero")]
    ZeroSpectrum,
    #[error("missing sweep: {0}")]
    MissingSweep(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("malformed input file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (divergence, non-convergence,
    /// degenerate spectra) as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Divergence { .. } | Error::AllDivergent | Error::ZeroSpectrum
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
