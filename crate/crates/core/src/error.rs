use thiserror::Error;

/// Errors raised across the pipeline.
///
/// Per-cell outcomes that the reports encode as data (an under-sized graph,
/// a subtopic with no sentiment matches) are not errors and never appear here.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no valid records in input ({malformed} malformed lines)")]
    EmptyInput { malformed: usize },

    #[error("duplicate post_id {0:?}")]
    DuplicatePostId(String),

    #[error("invalid time window: {0}")]
    InvalidWindow(String),

    #[error("unknown timezone {0:?}")]
    UnknownTimezone(String),

    #[error("graph has {0} nodes; bisection needs at least 2")]
    TooSmall(usize),

    #[error("graph is disconnected ({0} components)")]
    Disconnected(usize),

    #[error("node {0:?} has no side assignment")]
    UnassignedNode(String),

    #[error("side {side} has {size} nodes; need more than k_top = {k_top}")]
    SideTooSmall { side: char, size: usize, k_top: usize },

    #[error("all start-side nodes are absorbing")]
    DegenerateStart,

    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("input vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("need at least 3 observations, got {0}")]
    TooFew(usize),

    #[error("input has zero variance")]
    ZeroVariance,

    #[error("no record matched the lexicon")]
    AllUnmatched,

    #[error("unsupported report format {0:?}")]
    UnsupportedFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
