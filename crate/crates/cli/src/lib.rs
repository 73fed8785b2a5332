//! Batch front end: configuration, subcommands and result files.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;

use rotbec::Error;

/// Failure of a run, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(Error),
    Io(std::io::Error),
}

impl CliError {
    /// Errors raised while turning the configuration into a model: input
    /// validation failures count as configuration errors.
    pub fn from_model(e: Error) -> Self {
        match e {
            Error::Invalid(m) => CliError::Config(m),
            Error::Lattice(l) => CliError::Config(l.to_string()),
            other => CliError::Solver(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(Error::NoConvergence { .. }) => 3,
            CliError::Solver(Error::Unstable { .. }) => 4,
            CliError::Solver(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<rotbec::LatticeError> for CliError {
    fn from(e: rotbec::LatticeError) -> Self {
        match e {
            rotbec::LatticeError::Io(io) => CliError::Io(io),
            other => CliError::Solver(Error::Lattice(other)),
        }
    }
}

/// Worker count: the flag, else `ROTBEC_WORKERS`, else the available cores.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("ROTBEC_WORKERS").ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
