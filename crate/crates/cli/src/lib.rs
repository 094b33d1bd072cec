//! Command implementations behind the `rzeh` binary. Each command returns
//! its CSV tables or report text; the binary only handles arguments, output
//! placement and exit codes.

pub mod commands;
pub mod suite;
pub mod table;

use std::path::Path;

use rzeh::oracles::uniform_grid;
use rzeh::{Config, Error};

/// Command failure, mapped to the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A check or validation gate did not pass.
    #[error("{0}")]
    CheckFailed(String),
    #[error(transparent)]
    Core(#[from] Error),
    /// Malformed input on the command line or in a file.
    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// 1 for failed checks and validation, 2 for I/O and numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) | CliError::Core(Error::ValidationFailed(_)) => 1,
            CliError::Core(_) | CliError::Input(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Loads the config file, or the baseline parameters when none is given.
pub fn load_config(path: Option<&Path>) -> CliResult<Config> {
    match path {
        Some(p) => Config::load(p).map_err(|e| match e {
            Error::Io(io) => CliError::Input(format!("cannot read {}: {io}", p.display())),
            other => CliError::Input(format!("{}: {other}", p.display())),
        }),
        None => Ok(Config::new(rzeh::ModelParams::baseline())),
    }
}

/// Parses `min:max:n` into `n` evenly spaced values.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Input(format!("grid `{spec}` must look like min:max:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo || (n == 1 && hi != lo) {
        return Err(bad());
    }
    Ok(uniform_grid(lo, hi, n))
}
