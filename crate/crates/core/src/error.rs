use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("credible interval has zero width")]
    DegenerateInterval,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("self-loop on node `{0}`")]
    SelfLoop(String),

    #[error("node `{0}` has no neighbors")]
    IsolatedNode(String),

    #[error("informativeness undefined: {0}")]
    UndefinedInformativeness(&'static str),

    #[error("non-finite sampler state at iteration {iteration}: {detail}")]
    NonFiniteState { iteration: usize, detail: String },

    #[error("constraint sampling stalled: {parameter} stalled in {rate:.3} of post-burn-in scans")]
    Stalled { parameter: &'static str, rate: f64 },

    #[error("no initial state satisfies the informativeness bound {bound}")]
    InfeasibleStart { bound: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Sampler failures as opposed to bad inputs.
    pub fn is_diagnostic(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NonFiniteState { .. }
                | Error::Stalled { .. }
                | Error::InfeasibleStart { .. }
        )
    }
}
