use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config line {line}: {key}: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible pool: floors need {needed} but only {available} is available (deficit {deficit})")]
    InfeasiblePool {
        needed: f64,
        available: f64,
        deficit: f64,
    },

    #[error("objective is not finite at the start point")]
    NonFiniteStart,

    #[error("{0}")]
    Journey(String),

    #[error("scenario {id}: {field}: {message}")]
    Scenario {
        id: i64,
        field: String,
        message: String,
    },
}
