use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("ground sets differ: {left} vs {right}")]
    GroundSetMismatch { left: usize, right: usize },

    #[error("element {index} outside ground set of size {n}")]
    ElementOutOfRange { index: usize, n: usize },

    #[error("ground set size {n} exceeds the 64-element bitmask limit")]
    GroundSetTooLarge { n: usize },

    #[error("probability {value} must lie strictly between 0 and 1")]
    ProbabilityOutOfRange { value: String },

    #[error("exact search guard exceeded: {what} = {actual} > {limit}")]
    GuardExceeded {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("set is not {c}-bad for member {member}; no threshold exists")]
    NotBad { member: usize, c: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("stage `{stage}` exceeds its budget: {bound} > {budget}")]
    StageBudget {
        stage: &'static str,
        bound: String,
        budget: String,
    },

    #[error("precondition `{0}` cannot be satisfied")]
    Unsatisfiable(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
