//! Likelihood evaluation and parameter estimation.

pub mod conventional;
pub mod fit;
pub mod forward;
pub mod reestimate;

pub use conventional::{
    conventional_fit, conventional_forward_backward, conventional_forward_backward_with_prior,
    conventional_log_likelihood, conventional_step, ConventionalFit, ConventionalResult, ConventionalStep,
};
pub use fit::{check_initial, fit, FitConfig, FitReport, StopReason};
pub use forward::{
    backward, forward, forward_backward, forward_backward_with_prior, forward_with_prior, CostCounters,
    ForwardBackwardState, LOG_SPACE_THRESHOLD,
};
pub use reestimate::{estep, estep_with_prior, mstep, ExpectedCounts, PriorUpdate, Reestimate};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("model is not block-diagonal (within-symbol off-diagonal entries present)")]
    NotBlockDiagonal,
    #[error("sequence alphabet differs from model alphabet")]
    AlphabetMismatch,
    #[error("sequence is empty")]
    EmptySequence,
    #[error("symbol index {0} outside the model alphabet")]
    SymbolOutOfRange(usize),
    #[error("sequence has zero probability under the model (at run/position {run})")]
    ZeroProbabilitySequence { run: usize },
    #[error("initial distribution has length {found}, expected {expected}")]
    PriorLength { expected: usize, found: usize },
    #[error("state {state} has no expected outgoing transitions")]
    StarvedState { state: usize },
    #[error("log-likelihood decreased at iteration {iteration}: {trace:?}")]
    NonMonotoneLikelihood { iteration: usize, trace: Vec<f64> },
    #[error("initial entry ({row},{col}) is zero and would stay zero under re-estimation")]
    ZeroInitialEntry { row: usize, col: usize },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
}
