use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// The `Display` form starts with a stable, lowercase kind so the CLI can
/// surface it verbatim as a machine-parsable line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error("frame-width: frame {frame} has {found} values, expected {expected}")]
    FrameWidth {
        frame: usize,
        found: usize,
        expected: usize,
    },
    #[error("range: frame {frame} landmark {landmark}: {axis} = {value} outside [0, 1]")]
    CoordinateRange {
        frame: usize,
        landmark: usize,
        axis: char,
        value: f64,
    },
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("empty-result: sample {sample_id} has no frames left after filtering")]
    EmptyAfterFilter { sample_id: String },
    #[error("split: {0}")]
    Split(String),
    #[error("dimension: {0}")]
    Dimension(String),
    #[error("non-finite: {0} contains a non-finite value")]
    NonFinite(&'static str),
    #[error("label: unknown label {0:?}")]
    UnknownLabel(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("grid: {0}")]
    Grid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The leading kind token of the display form.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Schema(_) => "schema",
            Error::FrameWidth { .. } => "frame-width",
            Error::CoordinateRange { .. } => "range",
            Error::Invalid(_) => "invalid",
            Error::EmptyAfterFilter { .. } => "empty-result",
            Error::Split(_) => "split",
            Error::Dimension(_) => "dimension",
            Error::NonFinite(_) => "non-finite",
            Error::UnknownLabel(_) => "label",
            Error::Checkpoint(_) => "checkpoint",
            Error::Grid(_) => "grid",
        }
    }
}
