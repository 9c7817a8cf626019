use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate point set: {0}")]
    Degenerate(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Step(#[from] crate::solver::StepFailure),
    #[error("step {index} (t = {time}) failed: {source}")]
    RunAborted {
        index: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
