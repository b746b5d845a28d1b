//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("epsilon too large for this drift: min jump rate {min_rate} <= 0")]
    EpsilonTooLarge { min_rate: f64 },

    #[error("irregular drift `{0}` is not admissible for rate-table construction")]
    IrregularDrift(&'static str),

    #[error("infeasible trim mass {requested}, at most {removable} removable")]
    InfeasibleMass { requested: f64, removable: f64 },

    #[error("active set failed to stabilize after {0} retries")]
    ActiveSetCycle(usize),

    #[error("empty particle population")]
    EmptyPopulation,

    #[error("total event rate is not finite")]
    RateOverflow,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time window [{s}, {t}] exceeds the recorded horizon {horizon}")]
    HorizonExceeded { s: f64, t: f64, horizon: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
