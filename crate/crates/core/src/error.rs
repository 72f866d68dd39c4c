use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant onto an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },

    #[error("truncated file: header promises {expected} payload bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("trailing bytes after payload: {extra}")]
    TrailingBytes { extra: usize },

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown image id {0:?}")]
    UnknownImageId(String),

    #[error("no original score for id {id:?} (lang {lang})")]
    MissingOriginal { id: String, lang: String },

    #[error("mean original score is zero for lang {0}")]
    ZeroOriginalMean(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dataset too small: {got} records, need at least {min}")]
    DatasetTooSmall { got: usize, min: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
