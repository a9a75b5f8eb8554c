use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeError(String),

    #[error("orthonormality drift {drift:.3e} exceeds repair limit")]
    DriftTooLarge { drift: f64 },

    #[error("windowed init needs exactly w = {window} columns, got {got}")]
    WindowSizeMismatch { window: usize, got: usize },

    #[error("operation not valid in {0} mode")]
    ModeError(&'static str),

    #[error("window buffer holds {len} of {window} columns; downdate needs a full window")]
    BufferUnderflow { len: usize, window: usize },

    #[error("window buffer already holds {len} of {window} columns")]
    BufferOverflow { len: usize, window: usize },

    #[error("right singular vectors are not stored")]
    MissingRightFactors,

    #[error("ill-conditioned update: {0}")]
    ConditioningError(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical failure: {0}")]
    NumericalError(String),

    #[error("no model snapshot for step {0}")]
    MissingState(usize),

    #[error("channel has zero range over the horizon")]
    DegenerateRange,

    #[error("{}: parse error at row {row}{}: {msg}", path.display(), col.map(|c| format!(", column {c}")).unwrap_or_default())]
    ParseError {
        path: PathBuf,
        row: usize,
        col: Option<usize>,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for failures caused by the numbers rather than the inputs' shape or format.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DriftTooLarge { .. }
                | Error::ConditioningError(_)
                | Error::DegenerateData(_)
                | Error::NumericalError(_)
                | Error::DegenerateRange
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
