use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants fall in two classes: input validation (bad files, bad arguments,
/// violated preconditions) and numerical failure (degenerate geometry,
/// rank deficiency, search exhaustion). [`Error::is_numerical`] separates them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rotation axis must be unit length (|axis| = {norm})")]
    NonUnitAxis { norm: f64 },

    #[error("degenerate configuration: stacked pivot matrix has rank {rank} (need 3)")]
    RankDeficient { rank: usize },

    #[error(
        "degenerate configuration: maximum pairwise rotation between poses is {max_deg:.4} deg, need at least {required_deg} deg"
    )]
    InsufficientRotation { max_deg: f64, required_deg: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error(
        "inconsistent measurement: distance between points {i} and {j} is {board:.4} mm on the board but {measured:.4} mm measured (tolerance {tolerance} mm)"
    )]
    InconsistentMeasurement {
        i: usize,
        j: usize,
        board: f64,
        measured: f64,
        tolerance: f64,
    },

    #[error(
        "no perturbation within {tolerance_pct}% of target {target} mm after {draws} draws (closest {closest:.4} mm); widen the sweep or raise the budget"
    )]
    SearchFailed {
        target: f64,
        tolerance_pct: f64,
        draws: usize,
        closest: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for numerical or degeneracy failures, false for validation errors.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::InsufficientRotation { .. }
                | Error::DegenerateGeometry(_)
                | Error::SearchFailed { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
