use std::path::PathBuf;

/// Errors raised by the modelling, solving and reporting layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid inverter configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid switching angles: {0}")]
    InvalidAngles(String),

    #[error("angle count {got} does not match cell count {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid problem definition: {0}")]
    InvalidProblem(String),

    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),

    #[error("modulation index {0} exceeds 1 (infeasible demand)")]
    InfeasibleDemand(f64),

    #[error("fundamental amplitude {0} V is too small for a THD figure")]
    ZeroFundamental(f64),

    #[error("grid search needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("comparison is missing the {method} row at pu {pu}")]
    MissingMethod { pu: f64, method: &'static str },

    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("refusing to serialize non-finite value in field `{0}`")]
    NonFinite(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
