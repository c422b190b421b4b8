use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("illegal block schedule: {0}")]
    IllegalSchedule(String),

    #[error("empty KV cache")]
    EmptyCache,

    #[error("rank-deficient calibration design: {0}")]
    RankDeficient(String),

    #[error("calibration produced an invalid model: {0}")]
    BadCalibration(String),

    #[error("design point is infeasible: {0}")]
    Infeasible(crate::dse::Violation),

    #[error("no feasible design in the search space ({evaluated} points evaluated)")]
    NoFeasibleDesign { evaluated: usize },

    #[error("no routable design: {0}")]
    NoRoutableDesign(String),

    #[error("timeline has no reconfiguration events")]
    NoReconfigEvents,

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("config field `{field}`: {constraint}")]
    Config { field: String, constraint: String },

    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
