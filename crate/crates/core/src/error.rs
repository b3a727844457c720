use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // IDX ingestion
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated IDX data: header promises {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{extra} trailing bytes after IDX payload")]
    TrailingBytes { extra: usize },
    #[error("label {label} at index {index} is not a digit class")]
    LabelOutOfRange { index: usize, label: u8 },
    #[error("subset of {requested} examples requested from a dataset of {available}")]
    SizeTooLarge { requested: usize, available: usize },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward called on `{layer}` without a cached train-mode forward pass")]
    MissingForwardState { layer: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training size must be positive")]
    NonPositiveSize,

    // finger codes and stage-1 pre-training
    #[error("finger-code parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("finger-code value {value} for digit {digit} outside [0, 1]")]
    RangeViolation { digit: u8, value: f64 },
    #[error("digits {a} and {b} share the same finger code")]
    DuplicateCode { a: u8, b: u8 },
    #[error("finger-code table has no entry for digit {0}")]
    MissingDigit(u8),
    #[error("stage-1 pre-training stopped after {steps} steps at {correct}/10 correct")]
    DidNotConverge { steps: usize, correct: usize },
    #[error("embodied model requires a pre-trained classifier link")]
    MissingPretrainedLink,

    // checkpoints
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    // experiments and statistics
    #[error("dataset file missing: {}", .0.display())]
    DataMissing(PathBuf),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch { op, detail: detail.into() }
    }
}
