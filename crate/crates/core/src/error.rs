use thiserror::Error;

use crate::lp::LpError;
use crate::model::ConstraintRow;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("decision violates {row:?} row by {violation:.3e}")]
    InfeasibleDecision { row: ConstraintRow, violation: f64 },
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("lookahead LP unbounded at period {period}")]
    UnboundedLookahead { period: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("divergence detected at iteration {iteration}: component {component} reached {value}")]
    DivergenceDetected { iteration: usize, component: usize, value: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Lp(_)
            | Error::InfeasibleDecision { .. }
            | Error::UnboundedLookahead { .. }
            | Error::DivergenceDetected { .. } => 3,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
            Error::Assembly(_) | Error::InvalidParameters(_) | Error::Config(_) => 2,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation",
            3 => "numerical",
            _ => "io",
        }
    }
}
