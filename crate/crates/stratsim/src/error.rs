use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("training diverged in epoch {epoch}: non-finite parameter")]
    TrainingDiverged { epoch: usize },

    #[error("replication with seed {seed} failed: {source}")]
    Replication {
        seed: u64,
        #[source]
        source: Box<SimError>,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        SimError::Validation(msg.into())
    }

    /// True for errors caused by bad user input (config, CLI values, malformed
    /// data files); such errors map to exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SimError::Validation(_) | SimError::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
