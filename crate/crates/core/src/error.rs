use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// No state/duration tiling of the series has nonzero probability.
    #[error("impossible series: no feasible segmentation of {len} samples")]
    ImpossibleSeries { len: usize },

    /// A reestimation step could not produce parameters for a state.
    #[error("estimation error at state {}: {reason}", .state + 1)]
    Estimation { state: usize, reason: String },

    #[error("numeric error: {msg} (last iterate {last})")]
    Numeric { msg: String, last: f64 },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("brute-force enumeration refused: N={n_states}, T={len} exceeds N<=4, T<=12")]
    SizeGuard { n_states: usize, len: usize },

    #[error("invalid model: {}", format_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("parse error at {}:{line}: {msg}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn estimation(state: usize, reason: impl Into<String>) -> Self {
        Error::Estimation {
            state,
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed or inconsistent input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Infeasible(_)
                | Error::InvalidModel(_)
                | Error::Parse { .. }
                | Error::Schema(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::SizeGuard { .. }
        )
    }
}
