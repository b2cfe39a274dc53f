#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use shmm_core::equivalence::check_conditions;
use shmm_core::model::{ModelKind, PartitionedModel, StatePartition, SymbolAlphabet};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Binary partition with `total` states, each symbol getting at least one.
pub fn random_binary_partition(rng: &mut ChaCha20Rng, total: usize) -> StatePartition {
    let good = rng.gen_range(1..total);
    StatePartition::new(vec![good, total - good]).unwrap()
}

/// Spreads `mass` over `slots` strictly positive entries.
fn positive_split(rng: &mut ChaCha20Rng, mass: f64, slots: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..slots).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| mass * x / s).collect()
}

/// Fills row `i` outside the states of its own symbol with `mass`.
fn fill_cross(rng: &mut ChaCha20Rng, t: &mut DMatrix<f64>, p: &StatePartition, i: usize, mass: f64) {
    let own = p.range(p.symbol_of(i));
    let others: Vec<usize> = (0..p.total()).filter(|j| !own.contains(j)).collect();
    for (j, v) in others.iter().zip(positive_split(rng, mass, others.len())) {
        t[(i, *j)] = v;
    }
    // absorb rounding so the row sums to 1 as closely as f64 allows
    let sum: f64 = t.row(i).sum();
    let last = *others.last().unwrap();
    t[(i, last)] += 1.0 - sum;
}

/// General partitioned model whose within-symbol blocks have well separated
/// Gershgorin discs, rejected until all five admissibility conditions hold.
pub fn random_admissible(rng: &mut ChaCha20Rng, total: usize) -> PartitionedModel {
    loop {
        let p = random_binary_partition(rng, total);
        let mut t = DMatrix::zeros(total, total);
        for k in 0..2 {
            let r = p.range(k);
            let n = r.len();
            let radius = 0.02;
            let mut diag: Vec<f64> = (0..n).map(|q| 0.55 + 0.08 * q as f64).collect();
            diag.shuffle(rng);
            for (q, i) in r.clone().enumerate() {
                let d = if n == 1 { rng.gen_range(0.05..0.9) } else { diag[q] + rng.gen_range(0.0..0.02) };
                t[(i, i)] = d;
                let spread = rng.gen_range(0.005..radius);
                let offs = if n > 1 { positive_split(rng, spread, n - 1) } else { vec![] };
                let mut it = offs.into_iter();
                for j in r.clone().filter(|&j| j != i) {
                    t[(i, j)] = it.next().unwrap();
                }
                let used: f64 = t.row(i).sum();
                fill_cross(rng, &mut t, &p, i, 1.0 - used);
            }
        }
        let model =
            PartitionedModel::new(SymbolAlphabet::binary(), p, t, None, ModelKind::General).unwrap();
        if let Ok(report) = check_conditions(&model) {
            if report.passed() {
                return model;
            }
        }
    }
}

/// Block-diagonal model over `alphabet` with random state counts in `1..=max_per_symbol`.
pub fn random_block_diagonal_on(
    rng: &mut ChaCha20Rng,
    alphabet: SymbolAlphabet,
    max_per_symbol: usize,
) -> PartitionedModel {
    let counts: Vec<usize> = (0..alphabet.len()).map(|_| rng.gen_range(1..=max_per_symbol)).collect();
    let p = StatePartition::new(counts).unwrap();
    random_block_diagonal_with(rng, alphabet, p)
}

pub fn random_block_diagonal_with(
    rng: &mut ChaCha20Rng,
    alphabet: SymbolAlphabet,
    p: StatePartition,
) -> PartitionedModel {
    let n = p.total();
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        let d = rng.gen_range(0.05..0.97);
        t[(i, i)] = d;
        fill_cross(rng, &mut t, &p, i, 1.0 - d);
    }
    PartitionedModel::new(alphabet, p, t, None, ModelKind::BlockDiagonal).unwrap()
}

pub fn random_block_diagonal(rng: &mut ChaCha20Rng, total: usize) -> PartitionedModel {
    let p = random_binary_partition(rng, total);
    random_block_diagonal_with(rng, SymbolAlphabet::binary(), p)
}

/// Probability of `symbols` by summing over every state path.
pub fn brute_force_probability(model: &PartitionedModel, symbols: &[usize]) -> f64 {
    let p = model.partition();
    let t = model.transition();
    let pi = model.stationary();
    fn walk(
        t: &DMatrix<f64>,
        p: &StatePartition,
        symbols: &[usize],
        at: usize,
        state: usize,
        acc: f64,
    ) -> f64 {
        if at + 1 == symbols.len() {
            return acc;
        }
        p.range(symbols[at + 1]).map(|j| walk(t, p, symbols, at + 1, j, acc * t[(state, j)])).sum()
    }
    p.range(symbols[0]).map(|i| walk(t, p, symbols, 0, i, pi[i])).sum()
}

/// Unscaled symbol-by-symbol forward recursion.
pub fn unscaled_forward_probability(model: &PartitionedModel, symbols: &[usize]) -> f64 {
    let p = model.partition();
    let t = model.transition();
    let n = model.num_states();
    let mut alpha: Vec<f64> =
        (0..n).map(|i| if p.symbol_of(i) == symbols[0] { model.stationary()[i] } else { 0.0 }).collect();
    for &s in &symbols[1..] {
        alpha = (0..n)
            .map(|j| if p.symbol_of(j) == s { (0..n).map(|i| alpha[i] * t[(i, j)]).sum() } else { 0.0 })
            .collect();
    }
    alpha.iter().sum()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

/// 35-symbol bursty example with 13 runs.
pub const SHORTHAND_EXAMPLE: &str = "00011000000111110110010000011001000";
