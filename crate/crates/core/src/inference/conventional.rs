//! Symbol-by-symbol scaled forward-backward and Baum-Welch on the expanded
//! sequence. Works for any partitioned model (general or block-diagonal) and
//! serves as the reference for the run-length recursions. Cost is O(T·N²).

use nalgebra::DMatrix;

use super::fit::{is_converged, FitConfig};
use super::reestimate::PriorUpdate;
use super::InferenceError;
use crate::model::PartitionedModel;
use crate::stationary::solve_stationary;

#[derive(Debug, Clone)]
pub struct ConventionalResult {
    pub log_likelihood: f64,
    /// `γ_t` over all N states for every position t.
    pub posteriors: Vec<Vec<f64>>,
    /// `Σ_{t<T} ξ_t(i,j)`.
    pub expected_transitions: DMatrix<f64>,
    /// `Σ_{t<T} γ_t(i)`.
    pub expected_outgoing: Vec<f64>,
}

/// Forward-backward with the model's stationary vector as prior.
pub fn conventional_forward_backward(
    model: &PartitionedModel,
    sequence: &[usize],
) -> Result<ConventionalResult, InferenceError> {
    conventional_forward_backward_with_prior(model, model.stationary(), sequence)
}

pub fn conventional_forward_backward_with_prior(
    model: &PartitionedModel,
    prior: &[f64],
    sequence: &[usize],
) -> Result<ConventionalResult, InferenceError> {
    let (alphas, log_scales) = scaled_forward(model, prior, sequence)?;
    let t_len = sequence.len();
    let n = model.num_states();
    let a = model.transition();
    let emits = |state: usize, t: usize| model.partition().symbol_of(state) == sequence[t];

    let mut betas = vec![vec![0.0; n]; t_len];
    betas[t_len - 1] = (0..n).map(|i| if emits(i, t_len - 1) { 1.0 } else { 0.0 }).collect();
    for t in (0..t_len - 1).rev() {
        let inv_scale = (-log_scales[t + 1]).exp();
        for i in 0..n {
            betas[t][i] = (0..n)
                .filter(|&j| emits(j, t + 1))
                .map(|j| a[(i, j)] * betas[t + 1][j])
                .sum::<f64>()
                * inv_scale;
        }
    }

    let posteriors: Vec<Vec<f64>> = (0..t_len)
        .map(|t| (0..n).map(|i| alphas[t][i] * betas[t][i]).collect())
        .collect();
    let mut expected_transitions = DMatrix::zeros(n, n);
    for t in 0..t_len - 1 {
        let inv_scale = (-log_scales[t + 1]).exp();
        for i in 0..n {
            if alphas[t][i] == 0.0 {
                continue;
            }
            for j in (0..n).filter(|&j| emits(j, t + 1)) {
                expected_transitions[(i, j)] += alphas[t][i] * a[(i, j)] * betas[t + 1][j] * inv_scale;
            }
        }
    }
    let expected_outgoing = (0..n)
        .map(|i| posteriors[..t_len - 1].iter().map(|g| g[i]).sum())
        .collect();
    Ok(ConventionalResult {
        log_likelihood: log_scales.iter().sum(),
        posteriors,
        expected_transitions,
        expected_outgoing,
    })
}

/// Scaled forward pass only; returns `ln P(sequence)`.
pub fn conventional_log_likelihood(
    model: &PartitionedModel,
    sequence: &[usize],
) -> Result<f64, InferenceError> {
    let (_, log_scales) = scaled_forward(model, model.stationary(), sequence)?;
    Ok(log_scales.iter().sum())
}

fn scaled_forward(
    model: &PartitionedModel,
    prior: &[f64],
    sequence: &[usize],
) -> Result<(Vec<Vec<f64>>, Vec<f64>), InferenceError> {
    if sequence.is_empty() {
        return Err(InferenceError::EmptySequence);
    }
    let n = model.num_states();
    if prior.len() != n {
        return Err(InferenceError::PriorLength { expected: n, found: prior.len() });
    }
    if let Some(&bad) = sequence.iter().find(|&&s| s >= model.alphabet().len()) {
        return Err(InferenceError::SymbolOutOfRange(bad));
    }
    let a = model.transition();
    let f = |state: usize| model.partition().symbol_of(state);
    let mut alphas = Vec::with_capacity(sequence.len());
    let mut log_scales = Vec::with_capacity(sequence.len());
    let mut current: Vec<f64> = (0..n).map(|i| if f(i) == sequence[0] { prior[i] } else { 0.0 }).collect();
    for t in 0..sequence.len() {
        if t > 0 {
            let prev: &Vec<f64> = alphas.last().expect("t > 0");
            current = (0..n)
                .map(|j| {
                    if f(j) == sequence[t] {
                        (0..n).map(|i| prev[i] * a[(i, j)]).sum()
                    } else {
                        0.0
                    }
                })
                .collect();
        }
        let s: f64 = current.iter().sum();
        if !(s > 0.0) {
            return Err(InferenceError::ZeroProbabilitySequence { run: t });
        }
        current.iter_mut().for_each(|x| *x /= s);
        log_scales.push(s.ln());
        alphas.push(current.clone());
    }
    Ok((alphas, log_scales))
}

/// One Baum-Welch update on the expanded sequence.
#[derive(Debug, Clone)]
pub struct ConventionalStep {
    /// Log-likelihood of the parameters *before* the update.
    pub log_likelihood: f64,
    pub transition: DMatrix<f64>,
    /// `γ_1`.
    pub prior: Vec<f64>,
}

/// Standard count-ratio update. With `constrain_within_symbol` the
/// within-symbol off-diagonal counts are dropped before normalising.
pub fn conventional_step(
    model: &PartitionedModel,
    prior: &[f64],
    sequence: &[usize],
    constrain_within_symbol: bool,
) -> Result<ConventionalStep, InferenceError> {
    let r = conventional_forward_backward_with_prior(model, prior, sequence)?;
    let n = model.num_states();
    let partition = model.partition();
    let mut transition = r.expected_transitions.clone();
    for i in 0..n {
        if constrain_within_symbol {
            for j in partition.range(partition.symbol_of(i)) {
                if j != i {
                    transition[(i, j)] = 0.0;
                }
            }
        }
        let out: f64 = transition.row(i).sum();
        if !(out >= 1e-300) {
            return Err(InferenceError::StarvedState { state: i });
        }
        transition.row_mut(i).scale_mut(1.0 / out);
    }
    Ok(ConventionalStep { log_likelihood: r.log_likelihood, transition, prior: r.posteriors[0].clone() })
}

#[derive(Debug, Clone)]
pub struct ConventionalFit {
    pub trace: Vec<f64>,
    pub transition: DMatrix<f64>,
    pub prior: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Conventional Baum-Welch loop with the same stopping rule and prior
/// update as the run-length fit.
pub fn conventional_fit(
    initial: &PartitionedModel,
    sequence: &[usize],
    config: &FitConfig,
) -> Result<ConventionalFit, InferenceError> {
    let mut model = initial.clone();
    let mut prior = initial.stationary().to_vec();
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let step = conventional_step(&model, &prior, sequence, true)?;
        trace.push(step.log_likelihood);
        let done = trace.len() >= 2 && is_converged(trace[trace.len() - 2], step.log_likelihood, config.tol);
        if done || iterations >= config.max_iter {
            return Ok(ConventionalFit {
                transition: model.transition().clone(),
                prior,
                iterations,
                converged: done,
                trace,
            });
        }
        let stationary = solve_stationary(&step.transition)?;
        model = PartitionedModel::new_unchecked(
            model.alphabet().clone(),
            model.partition().clone(),
            step.transition,
            stationary.clone(),
            model.kind(),
        );
        prior = match config.prior_update {
            PriorUpdate::FirstPosterior => step.prior,
            PriorUpdate::Stationary => stationary,
        };
        iterations += 1;
    }
}
