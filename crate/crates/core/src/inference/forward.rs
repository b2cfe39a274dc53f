//! Run-length forward and backward recursions for block-diagonal models.
//!
//! Vectors are indexed by run, not by symbol position, and only the
//! sub-vector of states emitting the run's symbol is stored (the rest is
//! exactly zero). A run of length `m` in state `j` contributes the scalar
//! power `Λ(j,j)^{m−1}`, so the cost per pass depends on the number of runs
//! `C` only.

use nalgebra::DMatrix;

use super::InferenceError;
use crate::model::{PartitionedModel, StatePartition};
use crate::rle::RunLengthSequence;

/// `(m−1)·|ln λ|` above which diagonal powers are evaluated in log space.
pub const LOG_SPACE_THRESHOLD: f64 = 600.0;

/// Per-pass instrumentation of the forward recursion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostCounters {
    /// Products `α̂_{c−1} Λ_{μ_{c−1} μ_c}` (one per run boundary).
    pub inter_block_products: u64,
    /// Evaluations of `Λ_{μμ}^{m−1}` (one per run).
    pub diagonal_powers: u64,
}

impl std::ops::AddAssign for CostCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.inter_block_products += rhs.inter_block_products;
        self.diagonal_powers += rhs.diagonal_powers;
    }
}

/// Scaled forward/backward variables at run ends.
#[derive(Debug, Clone)]
pub struct ForwardBackwardState {
    /// `α̂_c` restricted to the states of run c's symbol; each sums to 1.
    pub alphas: Vec<Vec<f64>>,
    /// `β̂_c` restricted the same way; empty until the backward pass runs.
    pub betas: Vec<Vec<f64>>,
    /// `ln s_c` of the per-run normalisers.
    pub log_scale_factors: Vec<f64>,
    /// `ln P(E|Λ) = Σ_c ln s_c`.
    pub log_likelihood: f64,
    pub counters: CostCounters,
    /// `Λ(j,j)^{m_c−1} / s_c` for the states of run c.
    pub(crate) run_weights: Vec<Vec<f64>>,
}

impl ForwardBackwardState {
    /// `α̂_c` expanded to all N states.
    pub fn alpha_full(&self, partition: &StatePartition, runs: &RunLengthSequence, c: usize) -> Vec<f64> {
        expand(partition, runs.runs()[c].symbol, &self.alphas[c])
    }

    /// `β̂_c` expanded to all N states.
    pub fn beta_full(&self, partition: &StatePartition, runs: &RunLengthSequence, c: usize) -> Vec<f64> {
        expand(partition, runs.runs()[c].symbol, &self.betas[c])
    }
}

fn expand(partition: &StatePartition, symbol: usize, sub: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; partition.total()];
    let r = partition.range(symbol);
    out[r].copy_from_slice(sub);
    out
}

pub(crate) fn check_inputs(
    model: &PartitionedModel,
    runs: &RunLengthSequence,
) -> Result<(), InferenceError> {
    if model.alphabet() != runs.alphabet() {
        return Err(InferenceError::AlphabetMismatch);
    }
    if !model.has_diagonal_blocks() {
        return Err(InferenceError::NotBlockDiagonal);
    }
    Ok(())
}

/// Forward pass using the model's stationary vector as the prior.
pub fn forward(
    model: &PartitionedModel,
    runs: &RunLengthSequence,
) -> Result<ForwardBackwardState, InferenceError> {
    forward_with_prior(model, model.stationary(), runs)
}

/// Forward pass from an explicit initial distribution.
pub fn forward_with_prior(
    model: &PartitionedModel,
    prior: &[f64],
    runs: &RunLengthSequence,
) -> Result<ForwardBackwardState, InferenceError> {
    check_inputs(model, runs)?;
    if prior.len() != model.num_states() {
        return Err(InferenceError::PriorLength { expected: model.num_states(), found: prior.len() });
    }
    let t = model.transition();
    let partition = model.partition();
    let all = runs.runs();
    let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(all.len());
    let mut run_weights = Vec::with_capacity(all.len());
    let mut log_scale_factors = Vec::with_capacity(all.len());
    let mut counters = CostCounters::default();

    for (c, run) in all.iter().enumerate() {
        let to = partition.range(run.symbol);
        let incoming: Vec<f64> = if c == 0 {
            prior[to.clone()].to_vec()
        } else {
            counters.inter_block_products += 1;
            let from = partition.range(all[c - 1].symbol);
            inter_block_product(&alphas[c - 1], t, from.start, to.start, to.len())
        };
        counters.diagonal_powers += 1;
        let diag: Vec<f64> = to.clone().map(|j| t[(j, j)]).collect();
        let step = apply_run(&incoming, &diag, run.count)
            .ok_or(InferenceError::ZeroProbabilitySequence { run: c })?;
        alphas.push(step.alpha);
        run_weights.push(step.weights);
        log_scale_factors.push(step.log_scale);
    }
    let log_likelihood = log_scale_factors.iter().sum();
    Ok(ForwardBackwardState {
        alphas,
        betas: Vec::new(),
        log_scale_factors,
        log_likelihood,
        counters,
        run_weights,
    })
}

/// `u_j = Σ_i α(i) Λ(from+i, to+j)`.
fn inter_block_product(
    alpha: &[f64],
    t: &DMatrix<f64>,
    from: usize,
    to: usize,
    len: usize,
) -> Vec<f64> {
    (0..len)
        .map(|j| alpha.iter().enumerate().map(|(i, &a)| a * t[(from + i, to + j)]).sum())
        .collect()
}

struct RunStep {
    alpha: Vec<f64>,
    weights: Vec<f64>,
    log_scale: f64,
}

/// Multiplies `incoming` by `diag^{m−1}` and normalises. Returns `None`
/// when the run has zero probability.
fn apply_run(incoming: &[f64], diag: &[f64], m: usize) -> Option<RunStep> {
    let k = (m - 1) as f64;
    let exponents: Vec<f64> = diag
        .iter()
        .map(|&d| if m == 1 { 0.0 } else if d > 0.0 { k * d.ln() } else { f64::NEG_INFINITY })
        .collect();
    let needs_log = exponents.iter().any(|e| e.abs() > LOG_SPACE_THRESHOLD);

    if !needs_log {
        let powers: Vec<f64> = diag
            .iter()
            .map(|&d| if m == 1 { 1.0 } else if m - 1 <= i32::MAX as usize { d.powi((m - 1) as i32) } else { d.powf(k) })
            .collect();
        let raw: Vec<f64> = incoming.iter().zip(&powers).map(|(u, p)| u * p).collect();
        let s: f64 = raw.iter().sum();
        if s.is_normal() {
            return Some(RunStep {
                alpha: raw.iter().map(|x| x / s).collect(),
                weights: powers.iter().map(|p| p / s).collect(),
                log_scale: s.ln(),
            });
        }
    }

    // log-domain: ℓ_j = ln u_j + (m−1) ln λ_j
    let logs: Vec<f64> = incoming
        .iter()
        .zip(&exponents)
        .map(|(&u, &e)| if u > 0.0 { u.ln() + e } else { f64::NEG_INFINITY })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    let shifted: Vec<f64> = logs.iter().map(|&l| (l - top).exp()).collect();
    let total: f64 = shifted.iter().sum();
    let log_scale = top + total.ln();
    Some(RunStep {
        alpha: shifted.iter().map(|x| x / total).collect(),
        weights: exponents.iter().map(|&e| (e - log_scale).exp()).collect(),
        log_scale,
    })
}

/// Backward pass sharing the forward normalisers, so that
/// `Σ_i α̂_c(i) β̂_c(i) = 1` for every run.
pub fn backward(
    model: &PartitionedModel,
    runs: &RunLengthSequence,
    forward: &ForwardBackwardState,
) -> Result<Vec<Vec<f64>>, InferenceError> {
    check_inputs(model, runs)?;
    let t = model.transition();
    let partition = model.partition();
    let all = runs.runs();
    let c_last = all.len() - 1;
    let mut betas: Vec<Vec<f64>> = vec![Vec::new(); all.len()];
    betas[c_last] = vec![1.0; partition.counts()[all[c_last].symbol]];
    for c in (0..c_last).rev() {
        let from = partition.range(all[c].symbol);
        let to = partition.range(all[c + 1].symbol);
        let weights = &forward.run_weights[c + 1];
        let next = &betas[c + 1];
        let beta: Vec<f64> = from
            .clone()
            .map(|i| {
                to.clone()
                    .enumerate()
                    .map(|(jj, j)| t[(i, j)] * weights[jj] * next[jj])
                    .sum()
            })
            .collect();
        betas[c] = beta;
    }
    Ok(betas)
}

/// Forward then backward, with the model's stationary vector as prior.
pub fn forward_backward(
    model: &PartitionedModel,
    runs: &RunLengthSequence,
) -> Result<ForwardBackwardState, InferenceError> {
    forward_backward_with_prior(model, model.stationary(), runs)
}

pub fn forward_backward_with_prior(
    model: &PartitionedModel,
    prior: &[f64],
    runs: &RunLengthSequence,
) -> Result<ForwardBackwardState, InferenceError> {
    let mut state = forward_with_prior(model, prior, runs)?;
    state.betas = backward(model, runs, &state)?;
    Ok(state)
}
