use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {0:?}: extents must be non-empty and positive")]
    InvalidShape(Vec<usize>),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },

    #[error("layer {layer}: {message}")]
    Layer { layer: String, message: String },

    #[error("backward called without a forward record for {0}")]
    MissingRecord(&'static str),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config row {row} ({text}): {message}")]
    ShapeChain {
        row: usize,
        text: String,
        message: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint mismatch at layer {layer}: {message}")]
    CheckpointMismatch { layer: String, message: String },

    #[error("code length mismatch: {0} bits vs {1} bits")]
    BitsMismatch(usize, usize),

    #[error("code file line {line}: {message}")]
    CodeFile { line: usize, message: String },

    #[error("manifest {path}: line {line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty codebook")]
    EmptyCodeBook,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Divergence { iteration: u64, loss: f64 },

    #[error("{path}: {source}")]
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
}
