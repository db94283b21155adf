//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulators, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (out of range, wrong shape, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation point coincides with a source singularity.
    #[error("singularity: evaluation point within {0} m of a point source")]
    Singularity(f64),

    /// A linear system was rank deficient and no regularization was supplied.
    #[error("ill-posed system: {0}")]
    IllPosed(String),

    /// A requested physical configuration cannot be realized.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Input data are degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Network parameters contain non-finite values.
    #[error("model corrupt: non-finite parameter in layer {layer}")]
    ModelCorrupt { layer: usize },

    /// The PDE loss needs second derivatives the activation does not have.
    #[error("activation `{0}` is not twice differentiable; cannot evaluate a PDE loss")]
    UnsupportedForPde(&'static str),

    /// Training loss became non-finite. Carries the last checkpoint whose
    /// parameters were still finite, when one exists.
    #[error("training diverged at iteration {iteration}")]
    TrainingDiverged {
        iteration: usize,
        last_checkpoint: Option<Box<crate::neural::MlpModel>>,
    },

    /// Configuration file could not be parsed or validated.
    #[error("config error ({path}): {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
