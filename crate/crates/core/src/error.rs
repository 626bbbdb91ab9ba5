use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by a zero weight")]
    ZeroWeightDivisor,
    #[error("negative probability {0}")]
    NegativeProbability(f64),
    #[error("log weight is NaN")]
    NanWeight,
    #[error("scale parameter must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("model error: {0}")]
    Model(String),
    #[error("resumption already consumed")]
    ResumptionConsumed,
    #[error("response does not match the pending {expected} request")]
    ResponseTypeMismatch { expected: &'static str },
    #[error("model diverged while replaying its response log at response {at}")]
    NondeterministicModel { at: usize },
    #[error("resumption was not started with response recording")]
    NotRecorded,
    #[error("no handler for {0} request")]
    UnhandledRequest(&'static str),
    #[error("histogram has zero total weight")]
    DegenerateHistogram,
    #[error("all particles have zero weight at resampling step {step}")]
    ParticleDegeneracy { step: usize },
    #[error("cannot perturb an empty trace")]
    EmptyTrace,
    #[error("enumeration grid of {0} points exceeds the limit")]
    GridTooLarge(u128),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("dates are not strictly increasing at {path}:{line}")]
    NonMonotoneDates { path: PathBuf, line: usize },
    #[error("missing records for (year, month): {}", format_missing(.0))]
    CoverageGap(Vec<(i32, u32)>),
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn format_missing(missing: &[(i32, u32)]) -> String {
    let shown: Vec<String> = missing.iter().take(10).map(|(y, m)| format!("({y}, {m})")).collect();
    if missing.len() > shown.len() {
        format!("{} and {} more", shown.join(", "), missing.len() - shown.len())
    } else {
        shown.join(", ")
    }
}

impl Error {
    pub(crate) fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through phase tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for weight-collapse failures raised by inference.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateHistogram | Error::ParticleDegeneracy { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
