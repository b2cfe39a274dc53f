mod common;

use common::{random_block_diagonal, random_block_diagonal_on, rng, unscaled_forward_probability};
use proptest::prelude::*;
use shmm_core::fixtures::cell;
use shmm_core::inference::{
    conventional_fit, conventional_forward_backward, conventional_forward_backward_with_prior,
    conventional_step, estep, estep_with_prior, fit, forward, forward_backward, mstep, FitConfig,
    PriorUpdate, StopReason,
};
use shmm_core::model::{PartitionedModel, SymbolAlphabet};
use shmm_core::rle::{encode, error_probability, RunLengthSequence};
use shmm_core::simulate::{simulate, simulate_symbols};
use shmm_core::validation::validate_against;

fn sample(model: &PartitionedModel, len: usize, seed: u64) -> (Vec<usize>, RunLengthSequence) {
    let symbols = simulate_symbols(model, len, seed).unwrap();
    let runs = RunLengthSequence::from_symbols(model.alphabet().clone(), &symbols).unwrap();
    (symbols, runs)
}

/// Position of the last symbol of each run.
fn run_ends(runs: &RunLengthSequence) -> Vec<usize> {
    runs.runs()
        .iter()
        .scan(0usize, |at, r| {
            *at += r.count;
            Some(*at - 1)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forward_matches_conventional(seed in any::<u64>(), states in 2usize..7, len in 1usize..3000) {
        let m = random_block_diagonal(&mut rng(seed), states);
        let (symbols, runs) = sample(&m, len, seed ^ 1);
        let fast = forward(&m, &runs).unwrap().log_likelihood;
        let slow = conventional_forward_backward(&m, &symbols).unwrap().log_likelihood;
        prop_assert!((fast - slow).abs() <= 1e-9, "{} vs {}", fast, slow);
    }

    #[test]
    fn forward_matches_conventional_ternary(seed in any::<u64>(), len in 1usize..1000) {
        let alphabet = SymbolAlphabet::new(vec!['a', 'b', 'c']).unwrap();
        let m = random_block_diagonal_on(&mut rng(seed), alphabet, 3);
        let (symbols, runs) = sample(&m, len, seed ^ 2);
        let fast = forward(&m, &runs).unwrap().log_likelihood;
        let slow = conventional_forward_backward(&m, &symbols).unwrap().log_likelihood;
        prop_assert!((fast - slow).abs() <= 1e-9);
    }

    #[test]
    fn scaled_equals_unscaled(seed in any::<u64>(), states in 2usize..6, len in 1usize..=30) {
        let m = random_block_diagonal(&mut rng(seed), states);
        let (symbols, runs) = sample(&m, len, seed ^ 3);
        let scaled = forward(&m, &runs).unwrap().log_likelihood;
        let direct = unscaled_forward_probability(&m, &symbols).ln();
        prop_assert!((scaled - direct).abs() <= 1e-10);
    }

    #[test]
    fn posteriors_and_counts_match_conventional(seed in any::<u64>(), states in 2usize..6, len in 2usize..800) {
        let m = random_block_diagonal(&mut rng(seed), states);
        let (symbols, runs) = sample(&m, len, seed ^ 4);
        let fb = forward_backward(&m, &runs).unwrap();
        let e = estep(&m, &runs).unwrap();
        let conv = conventional_forward_backward(&m, &symbols).unwrap();
        let p = m.partition();
        for (c, &t) in run_ends(&runs).iter().enumerate() {
            let mine = fb.alpha_full(p, &runs, c);
            let beta = fb.beta_full(p, &runs, c);
            for i in 0..states {
                prop_assert!((mine[i] * beta[i] - conv.posteriors[t][i]).abs() <= 1e-8);
            }
            prop_assert!((fb.alphas[c].iter().zip(&fb.betas[c]).map(|(a, b)| a * b).sum::<f64>() - 1.0).abs() <= 1e-10);
        }
        prop_assert!(fb.betas.last().unwrap().iter().all(|&b| b == 1.0));
        prop_assert!((&e.transitions - &conv.expected_transitions).abs().max() <= 1e-8);
        for i in 0..states {
            prop_assert!((e.outgoing[i] - conv.expected_outgoing[i]).abs() <= 1e-8);
        }
    }

    #[test]
    fn em_is_monotone(seed in any::<u64>(), states in 2usize..6, len in 200usize..2000) {
        let mut r = rng(seed);
        let truth = random_block_diagonal(&mut r, states);
        let init = common::random_block_diagonal_with(&mut r, truth.alphabet().clone(), truth.partition().clone());
        let (_, runs) = sample(&truth, len, seed ^ 5);
        match fit(&init, &runs, &FitConfig { max_iter: 60, ..Default::default() }) {
            Ok(report) => {
                for w in report.loglik_trace.windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-8 * w[0].abs());
                }
            }
            // a symbol absent from the interior of a short sequence starves its states
            Err(shmm_core::InferenceError::StarvedState { .. }) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}

#[test]
fn one_iteration_matches_conventional() {
    let mut r = rng(2024);
    for instance in 0..20u64 {
        let m = random_block_diagonal(&mut r, 3);
        let (symbols, runs) = sample(&m, 200, instance);
        let counts = estep(&m, &runs).unwrap();
        let next = mstep(&counts, &m, PriorUpdate::FirstPosterior).unwrap();
        let conv = conventional_step(&m, m.stationary(), &symbols, true).unwrap();
        assert!((next.model.transition() - &conv.transition).abs().max() <= 1e-6, "instance {instance}");
        assert!((counts.log_likelihood - conv.log_likelihood).abs() <= 1e-6);
        for (a, b) in next.prior.iter().zip(&conv.prior) {
            assert!((a - b).abs() <= 1e-8);
        }
    }
}

#[test]
fn fit_trace_matches_conventional_fit() {
    let mut r = rng(77);
    for instance in 0..4u64 {
        let truth = random_block_diagonal(&mut r, 3);
        let init = common::random_block_diagonal_with(&mut r, truth.alphabet().clone(), truth.partition().clone());
        let (symbols, runs) = sample(&truth, 2000, instance);
        let config = FitConfig { max_iter: 30, ..Default::default() };
        let fast = fit(&init, &runs, &config).unwrap();
        let slow = conventional_fit(&init, &symbols, &config).unwrap();
        assert_eq!(fast.iterations, slow.iterations);
        for (a, b) in fast.loglik_trace.iter().zip(&slow.trace) {
            assert!((a - b).abs() <= 1e-6, "instance {instance}: {a} vs {b}");
        }
        assert!((fast.final_model.transition() - &slow.transition).abs().max() <= 1e-6);
    }
}

#[test]
fn stationary_prior_variant_matches_conventional_step() {
    let mut r = rng(5);
    let m = random_block_diagonal(&mut r, 4);
    let (symbols, runs) = sample(&m, 500, 1);
    let counts = estep(&m, &runs).unwrap();
    let next = mstep(&counts, &m, PriorUpdate::Stationary).unwrap();
    assert_eq!(next.prior, next.model.stationary());
    let c1 = estep_with_prior(&next.model, &next.prior, &runs).unwrap();
    let conv = conventional_forward_backward_with_prior(&next.model, &next.prior, &symbols).unwrap();
    assert!((c1.log_likelihood - conv.log_likelihood).abs() <= 1e-9);
    let report = fit(&m, &runs, &FitConfig { prior_update: PriorUpdate::Stationary, ..Default::default() }).unwrap();
    assert_eq!(report.initial_distribution, report.final_model.stationary());
}

#[test]
fn counters_depend_on_run_count_only() {
    let m = cell("day1-morning").unwrap().converged_model().unwrap();
    let (_, runs) = sample(&m, 4000, 3);
    let base = forward(&m, &runs).unwrap().counters;
    for factor in [10, 100] {
        let scaled = runs.scaled(factor);
        assert_eq!(scaled.num_runs(), runs.num_runs());
        assert_eq!(forward(&m, &scaled).unwrap().counters, base);
    }
    assert_eq!(base.inter_block_products, runs.num_runs() as u64 - 1);
    assert_eq!(base.diagonal_powers, runs.num_runs() as u64);
}

#[test]
fn fixed_point_needs_at_most_two_iterations() {
    let truth = cell("day1-morning").unwrap().converged_model().unwrap();
    let (_, runs) = sample(&truth, 20_000, 9);
    let first = fit(&truth, &runs, &FitConfig::default()).unwrap();
    assert!(first.converged);
    let again = fit(&first.final_model, &runs, &FitConfig::default()).unwrap();
    assert!(again.converged);
    assert!(again.iterations <= 2, "{}", again.iterations);
}

#[test]
fn alternating_sequence_fits_swap_matrix() {
    let m = PartitionedModel::binary(
        [1, 1],
        &[&[0.5, 0.5], &[0.5, 0.5]],
        shmm_core::ModelKind::BlockDiagonal,
    )
    .unwrap();
    let runs = encode(&"01".repeat(500), m.alphabet()).unwrap();
    let report = fit(&m, &runs, &FitConfig::default()).unwrap();
    let t = report.final_model.transition();
    // count-ratio oracle: 999 boundary transitions, no self-transitions
    assert!(t[(0, 0)].abs() < 1e-12 && t[(1, 1)].abs() < 1e-12);
    assert!((t[(0, 1)] - 1.0).abs() < 1e-12 && (t[(1, 0)] - 1.0).abs() < 1e-12);
}

#[test]
fn day1_morning_workflow() {
    let c = cell("day1-morning").unwrap();
    let truth = c.converged_model().unwrap();
    let init = c.initial_model().unwrap();
    let seq = simulate(&truth, 20_000, 2020).unwrap();
    let runs = encode(&seq, truth.alphabet()).unwrap();
    let report = fit(&init, &runs, &FitConfig::default()).unwrap();
    assert_eq!(report.stop_reason, StopReason::Tolerance);
    for w in report.loglik_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-8 * w[0].abs());
    }
    let empirical = error_probability(&runs).unwrap();
    assert!((report.final_model.stationary()[2] - empirical).abs() <= 0.01);
    let v = validate_against(&runs, &report.final_model, 2021).unwrap();
    assert!(v.pe_difference().abs() <= 0.01);
    assert!(v.efrd_max_deviation(Some(30)) <= 0.05);
}
