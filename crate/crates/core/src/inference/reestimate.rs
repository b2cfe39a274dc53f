//! E-step and M-step of the run-length Baum-Welch iteration.

use nalgebra::DMatrix;

use super::forward::{forward_backward_with_prior, CostCounters};
use super::InferenceError;
use crate::model::{ModelKind, PartitionedModel};
use crate::rle::RunLengthSequence;
use crate::stationary::solve_stationary;

/// Posterior statistics at run boundaries.
#[derive(Debug, Clone)]
pub struct ExpectedCounts {
    /// `γ_c` restricted to the states of run c; each sums to 1.
    pub gamma: Vec<Vec<f64>>,
    /// `Γ_c`, the `n(μ_c) × n(μ_{c+1})` posterior of the state pair straddling
    /// the boundary between runs c and c+1. Every other block of `Γ_c` is zero.
    pub boundary: Vec<DMatrix<f64>>,
    /// `γ_1` over all N states.
    pub first: Vec<f64>,
    /// Expected i→j transitions over the whole sequence: boundary
    /// transitions off the diagonal blocks, within-run self-transitions on
    /// the diagonal.
    pub transitions: DMatrix<f64>,
    /// Expected transitions out of each state (row sums of `transitions`).
    pub outgoing: Vec<f64>,
    pub log_likelihood: f64,
    pub counters: CostCounters,
}

/// Computes run-boundary posteriors and expected transition counts.
///
/// Within a run the state cannot change (diagonal blocks), so state i in a
/// run of length m accounts for `γ_c(i)·(m−1)` self-transitions.
pub fn estep(model: &PartitionedModel, runs: &RunLengthSequence) -> Result<ExpectedCounts, InferenceError> {
    estep_with_prior(model, model.stationary(), runs)
}

pub fn estep_with_prior(
    model: &PartitionedModel,
    prior: &[f64],
    runs: &RunLengthSequence,
) -> Result<ExpectedCounts, InferenceError> {
    let fb = forward_backward_with_prior(model, prior, runs)?;
    let t = model.transition();
    let partition = model.partition();
    let n = model.num_states();
    let all = runs.runs();

    let gamma: Vec<Vec<f64>> = fb
        .alphas
        .iter()
        .zip(&fb.betas)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
        .collect();

    let mut transitions = DMatrix::zeros(n, n);
    let mut boundary = Vec::with_capacity(all.len().saturating_sub(1));
    for (c, run) in all.iter().enumerate() {
        let r = partition.range(run.symbol);
        let stay = (run.count - 1) as f64;
        for (ii, i) in r.clone().enumerate() {
            transitions[(i, i)] += gamma[c][ii] * stay;
        }
        if c + 1 < all.len() {
            let to = partition.range(all[c + 1].symbol);
            let weights = &fb.run_weights[c + 1];
            let beta_next = &fb.betas[c + 1];
            let alpha = &fb.alphas[c];
            let block = DMatrix::from_fn(r.len(), to.len(), |ii, jj| {
                alpha[ii] * t[(r.start + ii, to.start + jj)] * weights[jj] * beta_next[jj]
            });
            for ii in 0..r.len() {
                for jj in 0..to.len() {
                    transitions[(r.start + ii, to.start + jj)] += block[(ii, jj)];
                }
            }
            boundary.push(block);
        }
    }
    let outgoing = (0..n).map(|i| transitions.row(i).sum()).collect();
    let mut first = vec![0.0; n];
    let r0 = partition.range(all[0].symbol);
    first[r0.clone()].copy_from_slice(&gamma[0]);

    Ok(ExpectedCounts {
        gamma,
        boundary,
        first,
        transitions,
        outgoing,
        log_likelihood: fb.log_likelihood,
        counters: fb.counters,
    })
}

/// How the initial distribution is re-estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorUpdate {
    /// `π̃ = γ₁`.
    #[default]
    FirstPosterior,
    /// `π̃` = stationary vector of the re-estimated matrix.
    Stationary,
}

/// Re-estimated parameters. `model.stationary()` is always the stationary
/// vector of the new matrix; `prior` is the initial distribution the next
/// E-step should use.
#[derive(Debug, Clone)]
pub struct Reestimate {
    pub model: PartitionedModel,
    pub prior: Vec<f64>,
}

/// Count-ratio re-estimation: `Λ̃(i,j)` = expected i→j transitions over
/// expected transitions out of i. Within-symbol off-diagonals stay zero.
pub fn mstep(
    counts: &ExpectedCounts,
    template: &PartitionedModel,
    update: PriorUpdate,
) -> Result<Reestimate, InferenceError> {
    let n = template.num_states();
    let partition = template.partition();
    let mut transition = counts.transitions.clone();
    for i in 0..n {
        let k = partition.symbol_of(i);
        for j in partition.range(k) {
            if j != i {
                transition[(i, j)] = 0.0;
            }
        }
        let out = counts.outgoing[i];
        if !(out >= 1e-300) {
            return Err(InferenceError::StarvedState { state: i });
        }
        transition.row_mut(i).scale_mut(1.0 / out);
        let sum: f64 = transition.row(i).sum();
        transition.row_mut(i).scale_mut(1.0 / sum);
    }
    let stationary = solve_stationary(&transition)?;
    let prior = match update {
        PriorUpdate::FirstPosterior => counts.first.clone(),
        PriorUpdate::Stationary => stationary.clone(),
    };
    let model = PartitionedModel::new(
        template.alphabet().clone(),
        partition.clone(),
        transition,
        Some(stationary),
        ModelKind::BlockDiagonal,
    )?;
    Ok(Reestimate { model, prior })
}
