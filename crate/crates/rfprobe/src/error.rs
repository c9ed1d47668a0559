use std::path::PathBuf;

/// Crate-wide error type.
///
/// Variants map onto the process exit codes used by the `rfprobe` binary:
/// configuration and lookup problems exit 1, ingestion and I/O problems
/// exit 2, numerical/degenerate conditions exit 3 (and then only when an
/// entire batch fails).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("ingestion error at {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// All responses were zero, so the |R|-normalized estimators are
    /// undefined. Reported per unit as the weak-response condition.
    #[error("degenerate response: all responses zero (weak-response condition)")]
    WeakResponse,

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("fit error: {reason} (condition estimate {condition:.3e})")]
    Fit { reason: String, condition: f64 },
}

impl Error {
    /// Exit code the CLI maps this error onto.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Lookup(_) => 1,
            Error::Ingestion { .. } | Error::Io(_) | Error::Format(_) => 2,
            Error::Shape(_)
            | Error::WeakResponse
            | Error::DegenerateVariance(_)
            | Error::UndefinedCorrelation(_)
            | Error::Fit { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
