//! File formats, synthetic data, cross-validation experiments and the
//! `psl` command line, on top of `psl-core`.

pub mod cli;
pub mod experiment;
pub mod synth;
pub mod tsv;

use std::io;
use std::path::PathBuf;

use psl_core::eval::EvalError;
use psl_core::models::ModelError;
use psl_core::{GroundError, ParseError, SolveError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const RESOURCE: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{}:{source}", path.display())]
    Parse { path: PathBuf, source: ParseError },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("solver stopped after {iterations} iterations without converging (primal {primal:.3e}, dual {dual:.3e})")]
    NotConverged { iterations: usize, primal: f64, dual: f64 },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => exit::USAGE,
            Self::Solve(SolveError::InvalidConfig(_) | SolveError::Unsupported(_)) => exit::USAGE,
            Self::Ground(GroundError::CapExceeded { .. })
            | Self::Model(ModelError::Ground(GroundError::CapExceeded { .. }))
            | Self::Solve(_)
            | Self::NotConverged { .. } => exit::RESOURCE,
            Self::Io { .. }
            | Self::Format { .. }
            | Self::Parse { .. }
            | Self::Data(_)
            | Self::Ground(_)
            | Self::Model(_)
            | Self::Eval(_) => exit::DATA,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
