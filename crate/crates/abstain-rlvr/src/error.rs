use thiserror::Error;

/// Errors produced by the library.
///
/// Dataset-invariant violations are *not* errors; they are data returned by
/// [`crate::core::validate_dataset`]. Errors are reserved for conditions that
/// prevent an operation from producing a result at all.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: invalid JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("ratio {0} is outside [0, 1]")]
    RatioOutOfRange(f64),

    #[error("record {0}: not applicable: IDK injection requires mcq_tagged mode")]
    InjectNotApplicable(String),

    #[error("record {0}: no free option letter left after Z")]
    NoFreeLetter(String),

    #[error("missing base verdicts for ids: {}", .0.join(", "))]
    MissingVerdicts(Vec<String>),

    #[error("empty evaluation: no samples tallied")]
    EmptyEvaluation,

    #[error("SFT label references unknown task id {0}")]
    UnknownTaskId(String),

    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),

    #[error("r_abs sweep values must be finite, got {0}")]
    NonFiniteRabs(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
