//! Error types shared across the crate.

use thiserror::Error;

/// Errors from grid geometry and mass-function validation.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("mass {name} = {value} outside [0, 1]")]
    MassOutOfRange { name: &'static str, value: f64 },
    #[error("masses sum to {sum}, expected 1")]
    MassSum { sum: f64 },
    #[error("invalid grid spec: {0}")]
    BadSpec(&'static str),
}

/// Two mass functions in total conflict; Dempster's rule is undefined.
/// Callers fall back to the vacuous mass.
#[derive(Debug, Error)]
#[error("total conflict (K = {conflict}) in Dempster combination")]
pub struct TotalConflict {
    pub conflict: f64,
}

/// Errors from scenario and configuration files.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
}

/// Errors from binary snapshot decoding.
#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },
    #[error("unsupported snapshot version {0}")]
    BadVersion(u32),
    #[error("truncated snapshot: {0}")]
    Truncated(&'static str),
}

/// Top-level pipeline failure, mapped to the CLI exit-code contract.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// Configuration problems: missing or malformed files, schema
    /// violations, unknown keys. CLI exit code 2.
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    /// Everything that fails after the configuration was accepted.
    /// CLI exit code 3.
    #[error("runtime: {0}")]
    Runtime(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Runtime(_) => 3,
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Runtime(e.to_string())
    }
}
