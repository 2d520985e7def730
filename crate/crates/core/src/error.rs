use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by mesh construction, operator assembly, solvers and the
/// simulation driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh specification: {0}")]
    InvalidMesh(String),

    #[error("level {level} is outside the hierarchy (0..={max})")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("degenerate transfer: diagonal entry {index} of D is {value}")]
    DegenerateTransfer { index: usize, value: f64 },

    #[error("invalid material parameters: {0}")]
    InvalidMaterial(String),

    #[error("infeasible iterate: component {index} = {value} outside [{lower}, {upper}]")]
    Infeasible {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("Dirichlet value {value} at DOF {dof} is below the irreversibility bound {lower}")]
    DirichletBelowBound { dof: usize, value: f64, lower: f64 },

    #[error("solver did not converge at step {step} (t = {time}) within {iterations} iterations")]
    NotConverged { step: usize, time: f64, iterations: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
