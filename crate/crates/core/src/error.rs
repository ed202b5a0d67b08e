use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("window error: every axis must span at least {required} voxels, got {dims:?}")]
    Window { required: usize, dims: [usize; 3] },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("value {value} outside the range of measure {measure}")]
    Range { measure: String, value: f64 },

    #[error("input error for image '{id}': {reason}")]
    Input { id: String, reason: String },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("incomplete ratings: {0}")]
    IncompleteRatings(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("pair ({synthetic_id}, {training_id}) failed for {measure}: {source}")]
    Pair {
        synthetic_id: String,
        training_id: String,
        measure: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Dimension(_) => "dimension",
            Error::Data(_) => "data",
            Error::Window { .. } => "window",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::Range { .. } => "range",
            Error::Input { .. } => "input",
            Error::Corpus(_) => "corpus",
            Error::IncompleteRatings(_) => "incomplete_ratings",
            Error::DegenerateLabels(_) => "degenerate_labels",
            Error::Pair { source, .. } => source.kind(),
            Error::Io { .. } => "io",
        }
    }

    /// The innermost error, unwrapping pair context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Pair { source, .. } => source.root(),
            other => other,
        }
    }
}
