use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty profile bank {0}")]
    EmptyBank(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate building: {0}")]
    DegenerateBuilding(String),

    #[error("infeasible EV schedule for agent {agent}: {detail}")]
    InfeasibleEvSchedule { agent: usize, detail: String },

    #[error("infeasible comfort schedule for agent {agent}: {detail}")]
    InfeasibleComfort { agent: usize, detail: String },

    #[error("infeasible day problem ({family}): {detail}")]
    Infeasible { family: String, detail: String },

    #[error("solver stopped ({status}) with primal residual {primal:.3e}, dual residual {dual:.3e}")]
    Solver {
        status: String,
        primal: f64,
        dual: f64,
    },

    #[error("{0}")]
    Unsupported(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
