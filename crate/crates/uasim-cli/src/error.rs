use std::fmt;

use uasim::UaError;

/// Command-level failure, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    Config(String),
    /// Simulation or I/O failure during execution (exit 3).
    Numerical(String),
    /// Oracle comparison exceeded its tolerances (exit 4).
    OracleBounds(String),
    /// Parameters outside the validated regime of a model (exit 5).
    Regime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::OracleBounds(_) => 4,
            CliError::Regime(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::OracleBounds(m) => write!(f, "oracle bounds exceeded: {m}"),
            CliError::Regime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<UaError> for CliError {
    fn from(e: UaError) -> Self {
        match e {
            UaError::Config(_)
            | UaError::Dimension(_)
            | UaError::ModeIndex { .. }
            | UaError::Circuit(_)
            | UaError::NoiseRecordLength { .. } => CliError::Config(e.to_string()),
            UaError::ModelRange(_) => CliError::Regime(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
