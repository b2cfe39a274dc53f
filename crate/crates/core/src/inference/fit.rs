//! Modified Baum-Welch iteration.

use serde::Serialize;

use super::forward::CostCounters;
use super::reestimate::{estep_with_prior, mstep, PriorUpdate};
use super::InferenceError;
use crate::model::PartitionedModel;
use crate::rle::RunLengthSequence;

/// Relative slack allowed for a log-likelihood decrease between iterations.
pub const MONOTONE_SLACK: f64 = 1e-8;
/// Absolute fallback when `|log L|` is too small for a relative test.
pub const ABSOLUTE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub prior_update: PriorUpdate,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 500, prior_update: PriorUpdate::FirstPosterior }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIter,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Tolerance => "tolerance",
            StopReason::MaxIter => "max_iter",
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub initial_model: PartitionedModel,
    /// Parameters whose log-likelihood is the last trace entry.
    pub final_model: PartitionedModel,
    /// Initial distribution paired with `final_model` in the last E-step.
    pub initial_distribution: Vec<f64>,
    /// `ln P(E|Λ_k)` for k = 0..=iterations.
    pub loglik_trace: Vec<f64>,
    /// Number of M-steps applied.
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Summed over all forward passes.
    pub counters: CostCounters,
    /// Counters of each forward pass, in order.
    pub pass_counters: Vec<CostCounters>,
}

impl FitReport {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.loglik_trace.last().expect("trace has at least one entry")
    }
}

pub(crate) fn is_converged(previous: f64, current: f64, tol: f64) -> bool {
    let delta = (current - previous).abs();
    let scale = current.abs();
    if scale < ABSOLUTE_TOL || delta == 0.0 {
        delta < ABSOLUTE_TOL
    } else {
        delta / scale < tol
    }
}

/// Rejects initial models with a zero in a position EM may fill (every
/// diagonal and every cross-symbol entry). Zeros never move under EM.
pub fn check_initial(model: &PartitionedModel) -> Result<(), InferenceError> {
    if !model.has_diagonal_blocks() {
        return Err(InferenceError::NotBlockDiagonal);
    }
    let t = model.transition();
    let p = model.partition();
    let n = model.num_states();
    for i in 0..n {
        for j in 0..n {
            let allowed = i == j || p.symbol_of(i) != p.symbol_of(j);
            if allowed && !(t[(i, j)] > 0.0) {
                return Err(InferenceError::ZeroInitialEntry { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Runs E/M steps until the relative log-likelihood change falls below
/// `config.tol` or `config.max_iter` M-steps have been applied.
pub fn fit(
    initial: &PartitionedModel,
    runs: &RunLengthSequence,
    config: &FitConfig,
) -> Result<FitReport, InferenceError> {
    if !(config.tol > 0.0) {
        return Err(InferenceError::InvalidConfig("tolerance must be positive".into()));
    }
    check_initial(initial)?;
    let mut model = initial.clone();
    let mut prior = initial.stationary().to_vec();
    let mut trace: Vec<f64> = Vec::new();
    let mut pass_counters = Vec::new();
    let mut counters = CostCounters::default();
    let mut iterations = 0;
    loop {
        let counts = estep_with_prior(&model, &prior, runs)?;
        counters += counts.counters;
        pass_counters.push(counts.counters);
        let ll = counts.log_likelihood;
        if let Some(&previous) = trace.last() {
            if ll < previous - (MONOTONE_SLACK * previous.abs()).max(1e-12) {
                trace.push(ll);
                return Err(InferenceError::NonMonotoneLikelihood { iteration: iterations, trace });
            }
        }
        trace.push(ll);
        let converged = trace.len() >= 2 && is_converged(trace[trace.len() - 2], ll, config.tol);
        if converged || iterations >= config.max_iter {
            return Ok(FitReport {
                initial_model: initial.clone(),
                final_model: model,
                initial_distribution: prior,
                loglik_trace: trace,
                iterations,
                converged,
                stop_reason: if converged { StopReason::Tolerance } else { StopReason::MaxIter },
                counters,
                pass_counters,
            });
        }
        let next = mstep(&counts, &model, config.prior_update)?;
        model = next.model;
        prior = next.prior;
        iterations += 1;
    }
}
