mod common;

use common::{brute_force_probability, random_admissible, random_block_diagonal, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use shmm_core::equivalence::{check_conditions, construct_equivalent, verify_equivalence};
use shmm_core::inference::conventional_log_likelihood;
use shmm_core::model::PartitionedModel;

fn sorted_spectrum(t: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> = t.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    ev
}

fn all_sequences(d: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..d.pow(len as u32)).map(move |mut code| {
        (0..len)
            .map(|_| {
                let s = code % d;
                code /= d;
                s
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn admissible_models_are_equivalent(seed in any::<u64>(), states in 3usize..7) {
        let a = random_admissible(&mut rng(seed), states);
        let (lambda, w) = construct_equivalent(&a).unwrap();
        prop_assert!(verify_equivalence(&a, &lambda, 8).unwrap() <= 1e-9);

        let wf = w.assemble();
        for i in 0..states {
            prop_assert!((wf.row(i).sum() - 1.0).abs() <= 1e-10);
        }
        let spectrum_a = sorted_spectrum(a.transition());
        let spectrum_l = sorted_spectrum(lambda.transition());
        for (x, y) in spectrum_a.iter().zip(&spectrum_l) {
            prop_assert!((x.0 - y.0).abs() <= 1e-9 && (x.1 - y.1).abs() <= 1e-9, "{:?} {:?}", spectrum_a, spectrum_l);
        }
        for (k, ev) in w.eigenvalues.iter().enumerate() {
            let r = lambda.partition().range(k);
            for (q, i) in r.enumerate() {
                prop_assert!((lambda.transition()[(i, i)] - ev[q]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn construction_is_idempotent_on_block_diagonal(seed in any::<u64>(), states in 2usize..7) {
        let m = random_block_diagonal(&mut rng(seed), states);
        let report = check_conditions(&m).unwrap();
        prop_assert!(report.passed(), "{}", report);
        let (lambda, w) = construct_equivalent(&m).unwrap();
        prop_assert!(w.is_identity());
        prop_assert!((lambda.transition() - m.transition()).abs().max() <= 1e-10);
    }
}

/// Brute-force sum over state paths against the conventional forward recursion
/// on both A and Λ.
#[test]
fn path_enumeration_oracle() {
    let mut r = rng(42);
    for _ in 0..5 {
        let a = random_admissible(&mut r, 4);
        let (lambda, _) = construct_equivalent(&a).unwrap();
        for len in 1..=6 {
            for seq in all_sequences(2, len) {
                let direct = brute_force_probability(&a, &seq);
                let via_a = conventional_log_likelihood(&a, &seq).unwrap().exp();
                let via_l = conventional_log_likelihood(&lambda, &seq).unwrap().exp();
                assert!((direct - via_a).abs() <= 1e-12 * direct.max(1e-300) + 1e-15);
                assert!((direct - via_l).abs() / direct <= 1e-9, "{seq:?}");
            }
        }
    }
}

#[test]
fn unrelated_models_are_told_apart() {
    let mut r = rng(7);
    let mut separated = 0;
    for _ in 0..10 {
        let a = random_admissible(&mut r, 4);
        let b = random_admissible(&mut r, 4);
        if a.partition() != b.partition() {
            continue;
        }
        if verify_equivalence(&a, &b, 6).unwrap() > 1e-3 {
            separated += 1;
        }
    }
    assert!(separated > 0);
}

#[test]
fn stationary_vector_is_transported() {
    let mut r = rng(99);
    for _ in 0..20 {
        let a: PartitionedModel = random_admissible(&mut r, 5);
        let (lambda, w) = construct_equivalent(&a).unwrap();
        let w_inv = w.assemble().try_inverse().unwrap();
        let p = a.stationary();
        let n = a.num_states();
        for j in 0..n {
            let expected: f64 = (0..n).map(|i| p[i] * w_inv[(i, j)]).sum();
            assert!((lambda.stationary()[j] - expected).abs() <= 1e-10);
        }
        assert!((lambda.stationary().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }
}
