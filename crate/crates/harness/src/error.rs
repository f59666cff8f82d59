use std::path::PathBuf;

use fw_core::FwError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error at {location}: {message}")]
    Parse { path: PathBuf, location: String, message: String },

    #[error("column '{column}' is constant and cannot be Z-scored")]
    ZscoreDegenerate { column: String },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] FwError),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// 1 for usage or configuration problems, 2 for data problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Io { .. }
            | HarnessError::Parse { .. }
            | HarnessError::ZscoreDegenerate { .. }
            | HarnessError::Data(_) => 2,
            HarnessError::Core(e) => match e {
                FwError::InvalidParameter(_) | FwError::InvalidSchedule { .. } | FwError::Dimension { .. } => 1,
                FwError::RankDeficient { .. }
                | FwError::ZeroMatrix
                | FwError::DegenerateInstance(_)
                | FwError::InsufficientData { .. } => 2,
                FwError::NoConvergence { .. } | FwError::NumericalInconsistency { .. } => 3,
            },
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
