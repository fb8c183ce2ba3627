use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("horizon mismatch: expected {expected} hours, found {found}")]
    HorizonMismatch { expected: usize, found: usize },

    #[error("invalid demand curve for hour {hour}: {reason}")]
    InvalidCurve { hour: usize, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A best response or planner problem admits no feasible schedule.
    /// `hour` is the first (1-based) hour at which every partial schedule dies,
    /// when that can be pinned down.
    #[error("infeasible problem for player {player:?} (hour {hour:?})")]
    Infeasible {
        player: Option<usize>,
        hour: Option<usize>,
    },

    #[error("instance too large for exhaustive enumeration: {0} schedules")]
    TooLarge(f64),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
}
