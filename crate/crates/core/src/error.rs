use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("chain has no states")]
    EmptyChain,

    #[error("duplicate state id `{0}`")]
    DuplicateState(String),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("state index {0} out of range")]
    StateOutOfRange(usize),

    #[error("chain failed validation: {0}")]
    InvalidChain(String),

    #[error("stationary iteration did not converge after {iterations} iterations (residual {residual:e}); chain may be reducible or periodic")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("roof is missing state `{0}`")]
    RoofMissingState(String),

    #[error("roof value at state `{state}` is {value}; roof values must be >= 1")]
    RoofTooLow { state: String, value: u32 },

    #[error("name is empty")]
    EmptyName,

    #[error("no tower point emits this name (violation at position {position})")]
    InvalidName { position: usize },

    #[error("history has zero measure")]
    ZeroMeasureHistory,

    #[error("enumeration cap exceeded: more than {cap} valid histories of length {n}; use a smaller system or n")]
    EnumerationCap { cap: usize, n: usize },

    #[error("parameter q_{index} = {value} is outside (0, 1)")]
    BadPitskelParameter { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model spec: {0}")]
    ModelSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
