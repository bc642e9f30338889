use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed, missing or inconsistent input.
    Input,
    /// Training diverged or produced non-finite values.
    Numeric,
    /// A library invariant was violated.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("missing cell: sex {sex}, year {year}, age {age}")]
    MissingCell { sex: char, year: i32, age: u32 },
    #[error("duplicate cell: sex {sex}, year {year}, age {age}")]
    DuplicateCell { sex: char, year: i32, age: u32 },
    #[error("value out of range at {location}: {value} (expected {expected})")]
    Range {
        location: String,
        value: f64,
        expected: &'static str,
    },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("surface too short: {years} years available, {needed} needed")]
    SurfaceTooShort { years: usize, needed: usize },
    #[error("horizon {horizon} is not after the last observed year {last_year}")]
    HorizonInPast { horizon: i32, last_year: i32 },
    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },
    #[error(
        "insufficient horizon: year {needed} required, surface covers {first_year}..={last_year}"
    )]
    InsufficientHorizon {
        needed: i32,
        first_year: i32,
        last_year: i32,
    },
    #[error("surface gap: no mortality data for year {year}")]
    SurfaceGap { year: i32 },
    #[error("scheme undefined: {0}")]
    SchemeUndefined(String),
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),
    #[error("degenerate survival curve: {0}")]
    DegenerateCurve(String),
    #[error("no residents between age 15 and pension age on {date}")]
    EmptyDenominator { date: String },
    #[error("empty population table")]
    EmptyTable,
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Divergence { .. } => ErrorClass::Numeric,
            Error::Invariant(_) => ErrorClass::Internal,
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
