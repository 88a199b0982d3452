use thiserror::Error;

/// Errors surfaced by the pipeline. Variants map onto the CLI exit-code
/// classes: schema/data problems, configuration problems, and numeric
/// failures are kept distinct so callers can react differently.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("no candidate concepts: {0}")]
    NoCandidates(String),

    #[error("undefined similarity: {0}")]
    UndefinedSimilarity(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
