use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: no encounter histories")]
    EmptyInput,
    #[error("line {line}: expected {expected} occasions, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: entry {value} outside [0, {max_state}]")]
    StateOutOfRange {
        line: usize,
        value: i64,
        max_state: usize,
    },
    #[error("line {line}: history has no captures")]
    AllZeroRow { line: usize },
    #[error("line {line}: cannot parse {token:?} as a state label")]
    BadToken { line: usize, token: String },
    #[error("number of states must be at least 1")]
    NoStates,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("population size {n_pop} is smaller than the {observed} observed individuals")]
    PopulationTooSmall { n_pop: f64, observed: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid model specification {spec:?}: {reason}")]
    ModelSpec { spec: String, reason: String },
    #[error("no optimizer start converged")]
    NoConvergence,
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
