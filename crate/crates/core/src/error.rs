use std::path::PathBuf;

use crate::integrators::TableauViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-positive density {value:e} in cell {cell}")]
    NonPositiveDensity { cell: usize, value: f64 },

    #[error("non-positive temperature {value:e} in cell {cell}")]
    NonPositiveTemperature { cell: usize, value: f64 },

    #[error("maxwellian requires positive density and temperature, got rho={rho:e}, T={temperature:e}")]
    NonPositiveInput { rho: f64, temperature: f64 },

    #[error("non-finite value at index {index} after step")]
    StepUnstable { index: usize },

    #[error("grid too small: {cells} interior cells along axis {axis}, stencil needs {ghost}")]
    GridTooSmall { axis: usize, cells: usize, ghost: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported velocity dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid Butcher tableau: {}", join(.0))]
    InvalidTableau(Vec<TableauViolation>),

    #[error("invalid projective parameters: {0}")]
    InvalidParameters(String),

    #[error("eigensolver failed to converge for {0}")]
    EigensolverFailure(String),

    #[error("advice rejected: mode {mode} eigenvalue {re:e}{im:+e}i has projective amplification {amplification}")]
    AdviceRejected {
        mode: usize,
        re: f64,
        im: f64,
        amplification: f64,
    },

    #[error("stage {stage}, inner step {inner_step}: {source}")]
    Stage {
        stage: usize,
        inner_step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("outer step {step} at t={time}: {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: parse error: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: invalid configuration:\n  {}", .errors.join("\n  "))]
    Validation { path: String, errors: Vec<String> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join(v: &[TableauViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Error {
    /// Innermost error, with all step/stage context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Step { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for errors that signal a numerically unstable or unphysical run.
    pub fn is_instability(&self) -> bool {
        matches!(
            self.root(),
            Error::NonPositiveDensity { .. }
                | Error::NonPositiveTemperature { .. }
                | Error::StepUnstable { .. }
        )
    }

    /// Outer step index recorded by the run loop, if any.
    pub fn outer_step(&self) -> Option<usize> {
        match self {
            Error::Step { step, .. } => Some(*step),
            Error::Stage { source, .. } => source.outer_step(),
            _ => None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
