//! Symbol sequence generation from a partitioned model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::model::{validate_model, ModelError, PartitionedModel};

/// Identifier of the generator used by [`simulate`], recorded in output
/// metadata so sequences can be reproduced elsewhere.
pub const RNG_ALGORITHM: &str = "chacha20-seed_from_u64";

/// Samples `length` symbols. The initial state is drawn from the model's
/// stationary vector; output is a pure function of `(model, length, seed)`.
pub fn simulate(model: &PartitionedModel, length: usize, seed: u64) -> Result<String, ModelError> {
    let symbols = simulate_symbols(model, length, seed)?;
    let alphabet = model.alphabet();
    Ok(symbols.into_iter().map(|k| alphabet.symbol(k)).collect())
}

/// Like [`simulate`] but returns symbol indices.
pub fn simulate_symbols(
    model: &PartitionedModel,
    length: usize,
    seed: u64,
) -> Result<Vec<usize>, ModelError> {
    if length == 0 {
        return Err(ModelError::ZeroLength);
    }
    let violations = validate_model(model)?;
    if !violations.is_empty() {
        return Err(ModelError::Invalid(violations));
    }
    let n = model.num_states();
    let t = model.transition();
    let row_cdfs: Vec<Vec<f64>> = (0..n)
        .map(|i| cumulative(&(0..n).map(|j| t[(i, j)]).collect::<Vec<_>>()))
        .collect();
    let initial = cumulative(model.stationary());

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let partition = model.partition();
    let mut state = draw(&initial, rng.gen::<f64>());
    let mut out = Vec::with_capacity(length);
    out.push(partition.symbol_of(state));
    for _ in 1..length {
        state = draw(&row_cdfs[state], rng.gen::<f64>());
        out.push(partition.symbol_of(state));
    }
    Ok(out)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect()
}

/// Inverse-CDF draw; never selects a zero-probability index.
fn draw(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    let target = u * total;
    let mut prev = 0.0;
    let mut last_positive = 0;
    for (i, &c) in cdf.iter().enumerate() {
        if c > prev {
            if target < c {
                return i;
            }
            last_positive = i;
        }
        prev = c;
    }
    last_positive
}
