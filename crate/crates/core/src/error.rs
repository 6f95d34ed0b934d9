use thiserror::Error;

/// Errors raised by the estimation, simulation and design routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature of {which} integrates to {value}, not 1 (tolerance {tolerance:e})")]
    Normalisation { which: &'static str, value: f64, tolerance: f64 },

    #[error("non-finite objective or gradient at iteration {iteration}")]
    NonFinite { iteration: usize, last_good: Vec<f64> },

    #[error("optimizer diverged: loss increased for {steps} consecutive steps (last value {value})")]
    Diverged { steps: usize, value: f64 },

    #[error("fit of bridge {bridge} failed: {source}")]
    BridgeFit {
        bridge: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("all posterior weights underflow (max log-weight {max_log_weight})")]
    Underflow { max_log_weight: f64 },

    #[error("unknown {kind} '{name}' (known: {known})")]
    UnknownName { kind: &'static str, name: String, known: String },

    #[error("loss was computed with nu = {0}; the JSD bound needs nu = 1")]
    NuNotOne(f64),

    #[error("simulation budget {budget} exhausted before any complete evaluation (needs {needed})")]
    BudgetExhausted { budget: usize, needed: usize },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
