//! Semi-hidden Markov models with states partitioned by emitted symbol.
//!
//! A general partitioned transition matrix `A` can be converted to an
//! equivalent block-diagonal `Λ` ([`equivalence`]); `Λ` is fitted directly
//! from run-length encoded sequences ([`inference`]) and validated through
//! error-free run distributions ([`rle`]).

pub mod equivalence;
pub mod fixtures;
pub mod format;
pub mod inference;
pub mod model;
pub mod rle;
pub mod simulate;
pub mod stationary;
pub mod validation;

pub use equivalence::{
    check_conditions, construct_equivalent, construct_equivalent_with, verify_equivalence, Admissibility,
    ConditionId, ConditionReport, EquivalenceError, TransformW,
};
pub use inference::{fit, FitConfig, FitReport, InferenceError, PriorUpdate, StopReason};
pub use model::{ModelError, ModelKind, PartitionedModel, StatePartition, SymbolAlphabet, Violation};
pub use rle::{decode, efrd, encode, error_probability, EfrdTable, RleError, Run, RunLengthSequence};
pub use simulate::{simulate, simulate_symbols, RNG_ALGORITHM};
pub use stationary::{solve_stationary, stationary_distribution};
pub use validation::{validate_against, ValidationError, ValidationReport};
