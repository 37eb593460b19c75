use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("word of length {len} exceeds truncation level {max_level}")]
    WordTooLong { len: usize, max_level: usize },

    #[error("letter {letter} outside the alphabet 1..={d}")]
    LetterOutOfRange { letter: u8, d: usize },

    #[error("index {index} out of range for tensor dimension {total_dim}")]
    IndexOutOfRange { index: usize, total_dim: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("increments are not adjacent: [{0}, {1}] followed by [{2}, {3}]")]
    NonAdjacent(f64, f64, f64, f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cell ({i}, {j}) read before it was solved")]
    DpOrder { i: usize, j: usize },

    #[error(
        "linear system for column {column} is numerically singular (pivot {pivot:.3e}); \
         refine the coarse grid"
    )]
    StepSize { column: usize, pivot: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
