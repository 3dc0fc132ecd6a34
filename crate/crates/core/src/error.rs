use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid permutation {mapping:?}: {reason}")]
    InvalidPermutation { mapping: Vec<usize>, reason: String },

    #[error("shape mismatch: expected length {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid reference set: {0}")]
    InvalidReference(String),

    #[error("invalid rank {0}: ranks are one-based")]
    InvalidRank(usize),

    #[error("need at least 2 annotation series, found {0}")]
    InsufficientAnnotators(usize),

    #[error("matrix mode error: {0}")]
    Mode(String),

    #[error("n = {n} exceeds the exhaustive decoder limit of {limit}; use the topo or beam decoder")]
    SizeLimit { n: usize, limit: usize },

    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),

    #[error(
        "resampling failed for image {image} after {attempts} attempts \
         (smallest violating overlap {best_overlap}, bound < {bound})"
    )]
    ResampleFailure {
        image: usize,
        attempts: usize,
        best_overlap: usize,
        bound: usize,
    },

    #[error("{}", format_records(.0))]
    Records(Vec<RecordError>),

    #[error(
        "instance ids do not align: {} without a reference, {} without a prediction",
        .unmatched_predictions.len(),
        .unmatched_references.len()
    )]
    Alignment {
        unmatched_predictions: Vec<String>,
        unmatched_references: Vec<String>,
    },

    #[error("duplicate id `{0}`")]
    Duplicate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A problem with one line of a line-delimited input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// One-based line number.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for RecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn format_records(errors: &[RecordError]) -> String {
    let mut out = format!("{} malformed record(s)", errors.len());
    for e in errors {
        out.push_str("\n  ");
        out.push_str(&e.to_string());
    }
    out
}

impl Error {
    pub(crate) fn shape(expected: usize, found: usize) -> Self {
        Error::Shape { expected, found }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::shape(expected, found))
    }
}
