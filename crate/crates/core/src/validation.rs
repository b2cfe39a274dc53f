//! Model validation against a measured sequence: regenerate a sequence of
//! the same length from the model and compare error probabilities and
//! error-free run distributions.

use thiserror::Error;

use crate::model::{ModelError, PartitionedModel};
use crate::rle::{efrd, encode, error_probability, EfrdTable, RleError, RunLengthSequence};
use crate::simulate::simulate;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("measured sequence: {0}")]
    Measured(RleError),
    #[error("regenerated sequence: {0}")]
    Regenerated(RleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("model alphabet differs from the sequence alphabet")]
    AlphabetMismatch,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// `P_e` of the measured sequence.
    pub pe_measured: f64,
    /// `P̄_e` of the regenerated sequence.
    pub pe_model: f64,
    pub efrd_measured: EfrdTable,
    pub efrd_model: EfrdTable,
    pub regenerated: RunLengthSequence,
}

impl ValidationReport {
    pub fn pe_difference(&self) -> f64 {
        self.pe_measured - self.pe_model
    }

    /// `max_m |Pr(0^m|1)_measured − Pr(0^m|1)_model|`, over `m ≤ limit` or
    /// over the union of both supports.
    pub fn efrd_max_deviation(&self, limit: Option<usize>) -> f64 {
        self.efrd_measured.max_deviation(&self.efrd_model, limit)
    }
}

pub fn validate_against(
    measured: &RunLengthSequence,
    model: &PartitionedModel,
    seed: u64,
) -> Result<ValidationReport, ValidationError> {
    if measured.alphabet() != model.alphabet() {
        return Err(ValidationError::AlphabetMismatch);
    }
    let pe_measured = error_probability(measured).map_err(ValidationError::Measured)?;
    let efrd_measured = efrd(measured).map_err(ValidationError::Measured)?;
    let text = simulate(model, measured.total_length(), seed)?;
    let regenerated = encode(&text, model.alphabet()).map_err(ValidationError::Regenerated)?;
    let pe_model = error_probability(&regenerated).map_err(ValidationError::Regenerated)?;
    let efrd_model = efrd(&regenerated).map_err(ValidationError::Regenerated)?;
    Ok(ValidationReport { pe_measured, pe_model, efrd_measured, efrd_model, regenerated })
}
