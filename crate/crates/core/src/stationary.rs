//! Stationary distributions of row-stochastic matrices.

use nalgebra::{DMatrix, DVector};

use crate::model::{stochastic_violations, ModelError, ROW_SUM_TOL};

/// Stationary vector of a regular chain.
///
/// Regularity is checked on the zero pattern: some power `T^k`, `k ≤ N²`,
/// must be entrywise positive.
pub fn stationary_distribution(t: &DMatrix<f64>) -> Result<Vec<f64>, ModelError> {
    check_square(t)?;
    let violations = stochastic_violations(t, ROW_SUM_TOL);
    if !violations.is_empty() {
        return Err(ModelError::NonStochastic(violations));
    }
    let n = t.nrows();
    if !is_regular(t) {
        return Err(ModelError::NotRegular { max_power: n * n });
    }
    solve(t)
}

/// Stationary vector of any chain whose stationary vector is unique
/// (a single closed class; periodic chains allowed).
pub fn solve_stationary(t: &DMatrix<f64>) -> Result<Vec<f64>, ModelError> {
    check_square(t)?;
    solve(t)
}

fn check_square(t: &DMatrix<f64>) -> Result<(), ModelError> {
    if t.nrows() != t.ncols() || t.nrows() == 0 {
        return Err(ModelError::DimensionMismatch(format!(
            "transition is {}x{}, expected non-empty square",
            t.nrows(),
            t.ncols()
        )));
    }
    Ok(())
}

/// Whether some power up to N² of the zero pattern is entrywise positive.
pub fn is_regular(t: &DMatrix<f64>) -> bool {
    let n = t.nrows();
    let pattern: Vec<bool> = (0..n * n).map(|k| t[(k / n, k % n)] > 0.0).collect();
    let mut power = pattern.clone();
    for _ in 0..n * n {
        if power.iter().all(|&b| b) {
            return true;
        }
        let mut next = vec![false; n * n];
        for i in 0..n {
            for k in 0..n {
                if power[i * n + k] {
                    for j in 0..n {
                        next[i * n + j] |= pattern[k * n + j];
                    }
                }
            }
        }
        if next == power {
            return false;
        }
        power = next;
    }
    power.iter().all(|&b| b)
}

/// Solves `(I − Tᵀ) v = 0` with the last equation replaced by `Σ v = 1`,
/// followed by one step of iterative refinement.
fn solve(t: &DMatrix<f64>) -> Result<Vec<f64>, ModelError> {
    let n = t.nrows();
    let mut system = DMatrix::<f64>::identity(n, n) - t.transpose();
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;

    let lu = system.clone().lu();
    let mut v = lu.solve(&rhs).ok_or(ModelError::SingularStationarySystem)?;
    let residual = &rhs - &system * &v;
    if let Some(correction) = lu.solve(&residual) {
        v += correction;
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::SingularStationarySystem);
    }
    // a unique stationary vector is non-negative; anything else means the
    // system was numerically singular
    if v.iter().any(|&x| x < -1e-9) {
        return Err(ModelError::SingularStationarySystem);
    }
    let mut out: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    Ok(out)
}
