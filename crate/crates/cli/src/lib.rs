//! Batch front-end for the `dampwave` experiments: configuration, stage
//! orchestration and artifact output.

use std::fmt;

pub mod artifacts;
pub mod config;
pub mod stages;

pub use config::{parse_config, ConfigError, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// malformed command line or input table
    Usage(String),
    MissingInput(String),
    Io {
        path: String,
        source: std::io::Error,
    },
    Numerical(dampwave::Error),
}

impl CliError {
    /// 1 validation/parse, 2 missing inputs, 3 numerical failure.
    pub fn exit_code(&self) -> u8 {
        use dampwave::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::MissingInput(_) | CliError::Io { .. } => 2,
            CliError::Numerical(e) => match e {
                E::InvalidParameter(_) | E::InvalidGrid(_) | E::HypothesisViolation(_) | E::PositivityViolation(_) => 1,
                E::InsufficientSnapshots { .. } => 2,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::MissingInput(m) => write!(f, "missing input: {m}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<dampwave::Error> for CliError {
    fn from(e: dampwave::Error) -> Self {
        CliError::Numerical(e)
    }
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Usage(format!("{t:?} is not a number"))))
        .collect()
}

/// Worker count from the environment, applied to the global pool. Returns
/// the configured count, if any.
pub fn configure_workers() -> Result<Option<usize>, CliError> {
    let Ok(raw) = std::env::var(dampwave::lifespan::WORKERS_ENV) else { return Ok(None) };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!("{} = {raw:?} must be a positive integer", dampwave::lifespan::WORKERS_ENV))
    })?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}
