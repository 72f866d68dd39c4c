use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] prmcs::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Input { path: String, source: prmcs::Error },

    #[error("gradient check failed: max relative error {0:e}")]
    GradCheck(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) | CliError::Input { source: e, .. } => core_code(e),
            CliError::Config(_) | CliError::Json(_) => 2,
            CliError::GradCheck(_) | CliError::Io(_) => 1,
        }
    }
}

fn core_code(e: &prmcs::Error) -> u8 {
    use prmcs::Error::*;
    match e {
        Parse { .. }
        | InvalidRecord { .. }
        | BadMagic { .. }
        | VersionMismatch { .. }
        | TruncatedFile { .. }
        | TrailingBytes { .. }
        | Json(_)
        | DatasetTooSmall { .. } => 2,
        DimensionMismatch { .. } | ManifestMismatch(_) | ShapeMismatch(_) => 3,
        UnknownImageId(_) | MissingOriginal { .. } => 4,
        DegenerateInput(_) | ZeroOriginalMean(_) => 5,
        Io(_) => 1,
    }
}
