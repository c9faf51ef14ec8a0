use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box size {width}x{height}")]
    InvalidBox { width: f64, height: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("coincident edge endpoints have no angle")]
    DegenerateEdge,

    #[error("observation region lies entirely outside the frame")]
    EmptyRegion,

    #[error("histogram is not normalized (sum = {0})")]
    NotNormalized(f64),

    #[error("histogram has no mass")]
    EmptyHistogram,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("initialization error: {0}")]
    Init(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("frame {index}: {message}")]
    Frame { index: usize, message: String },

    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },

    #[error("metrics undefined: no ground-truth objects")]
    NoGroundTruth,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Input(_)
            | Error::Parse { .. }
            | Error::Frame { .. }
            | Error::Init(_)
            | Error::Io(_)
            | Error::Image(_)
            | Error::NoGroundTruth => 1,
            _ => 3,
        }
    }
}
