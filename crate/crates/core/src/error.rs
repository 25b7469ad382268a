use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("corrupt mask: {0}")]
    CorruptMask(String),
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("frame index {0} cannot be named with 7 digits")]
    NamingOverflow(u64),
    #[error("decoder failed (exit status {status}): {stderr}")]
    Decode { status: String, stderr: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },
    #[error("no seeds: tracking cannot start")]
    NoSeeds,
    #[error("metrics undefined: {0}")]
    UndefinedMetrics(String),
    #[error("tracking failed on chunk {chunk_id}: {msg}")]
    ChunkTracking { chunk_id: u32, msg: String },
    #[error("degenerate crop for {identity} at frame {frame}")]
    DegenerateCrop { frame: u32, identity: String },
    #[error("conflicting annotations for {identity} at frame {frame}: {first:?} vs {second:?}")]
    ConflictingAnnotation { identity: String, frame: u32, first: String, second: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("incomplete embedding store, missing outputs for: {}", .0.join(", "))]
    IncompleteStore(Vec<String>),
    #[error("inconsistent embedding store: {0}")]
    StoreInconsistent(String),
    #[error("not an embedding file")]
    NotAnEmbedding,
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("cannot stratify: class {class} has {count} examples (need at least 3)")]
    Stratification { class: String, count: usize },
    #[error("invalid class: {0}")]
    InvalidClass(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("sequence is empty")]
    EmptySequence,
    #[error("cosine similarity undefined for a zero-norm vector")]
    UndefinedCosine,
    #[error("not a model checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
