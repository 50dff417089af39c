use thiserror::Error;

/// Every failure the library can report.
///
/// Each variant maps to a stable machine-readable code through [`Error::code`],
/// which the command-line front end prints as a prefix.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dataset is empty; at least one observation is required")]
    EmptyDataset,

    #[error("observation {index} is not finite ({value})")]
    InvalidObservation { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scale must be positive and finite (got {0})")]
    InvalidScale(f64),

    #[error("posterior sample has {got} draws; at least 2 are required")]
    SampleTooSmall { got: usize },

    #[error("posterior draw {index} is not finite ({value})")]
    InvalidDraw { index: usize, value: f64 },

    #[error("log target is not finite at the initial state theta = {theta}")]
    BadInitialization { theta: f64 },

    #[error("Metropolis chain accepted {accepted} of {proposals} proposals; acceptance rate must lie strictly between 0 and 1")]
    DegenerateChain { accepted: usize, proposals: usize },

    #[error("sample has zero spread; use a fixed bandwidth instead")]
    DegenerateSample,

    #[error("theta = {theta} lies outside the density grid [{lo}, {hi}]")]
    OutOfGridRange { theta: f64, lo: f64, hi: f64 },

    #[error("log-sum-exp of an empty sequence")]
    EmptyInput,

    #[error("non-finite value {value} at position {index} in log-sum-exp input")]
    NonFiniteInput { index: usize, value: f64 },

    #[error("posterior density estimate {density:e} at theta = {theta} is at or below the floor; the density estimate does not cover the sample (sample/model mismatch?)")]
    DensityFloorViolation { theta: f64, density: f64 },

    #[error("log weight is not finite at theta = {theta}")]
    NonFiniteWeight { theta: f64 },

    #[error("integrand is zero everywhere on the integration window")]
    EmptySupport,

    #[error(
        "quadrature tolerance not met: best log value {best}, achieved error estimate {achieved:e}"
    )]
    ToleranceNotMet { best: f64, achieved: f64 },
}

impl Error {
    /// Stable identifier for scripting, e.g. `E_DENSITY_FLOOR`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyDataset => "E_EMPTY_DATASET",
            Error::InvalidObservation { .. } => "E_INVALID_OBSERVATION",
            Error::InvalidConfig(_) => "E_INVALID_CONFIG",
            Error::InvalidScale(_) => "E_INVALID_SCALE",
            Error::SampleTooSmall { .. } => "E_SAMPLE_TOO_SMALL",
            Error::InvalidDraw { .. } => "E_INVALID_DRAW",
            Error::BadInitialization { .. } => "E_BAD_INITIALIZATION",
            Error::DegenerateChain { .. } => "E_DEGENERATE_CHAIN",
            Error::DegenerateSample => "E_DEGENERATE_SAMPLE",
            Error::OutOfGridRange { .. } => "E_OUT_OF_GRID",
            Error::EmptyInput => "E_EMPTY_INPUT",
            Error::NonFiniteInput { .. } => "E_NON_FINITE_INPUT",
            Error::DensityFloorViolation { .. } => "E_DENSITY_FLOOR",
            Error::NonFiniteWeight { .. } => "E_NON_FINITE_WEIGHT",
            Error::EmptySupport => "E_EMPTY_SUPPORT",
            Error::ToleranceNotMet { .. } => "E_TOLERANCE_NOT_MET",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
