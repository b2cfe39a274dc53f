//! Block-diagonal equivalent of a general partitioned model.
//!
//! For every symbol ε the within-symbol block `A_εε` is diagonalised by its
//! left eigenvectors `V_εε` (rows). With `C_εε = diag(V_εε·1)` the rows of
//! `W_εε = C_εε⁻¹ V_εε` sum to one, and `Λ = W A W⁻¹` has diagonal
//! within-symbol blocks `Λ_εε = diag(λ_εε)`. Because `W·1 = 1`, `Λ` is
//! row-stochastic, `π = p W⁻¹` is its stationary vector, and every symbol
//! sequence has the same likelihood under `A` and `Λ`.

use std::fmt;

use nalgebra::{DMatrix, Schur};
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    stationarity_residual, validate_model, ModelError, ModelKind, PartitionedModel, Violation,
};

/// Imaginary parts above this make a block non-diagonalisable over the reals.
pub const IMAG_TOL: f64 = 1e-10;
/// Eigenvalues closer than this count as repeated.
pub const EIGEN_GAP_TOL: f64 = 1e-8;
/// Slack accepted on the structural checks of the constructed Λ.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Largest accepted condition number for `C_εε`, `A_εε` and `W_εε`.
pub const MAX_CONDITION: f64 = 1e12;
const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Debug, Error)]
pub enum EquivalenceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("admissibility conditions failed:\n{0}")]
    ConditionViolation(Box<ConditionReport>),
    #[error("block of symbol {symbol} has complex eigenvalue with |Im| = {imag:e}")]
    ComplexEigenvalues { symbol: usize, imag: f64 },
    #[error("constructed model is not stochastic: {0}")]
    NonStochasticResult(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("models have different alphabets")]
    AlphabetMismatch,
    #[error("enumeration of {symbols}^{max_len} sequences exceeds the 2^24 limit")]
    EnumerationTooLarge { symbols: usize, max_len: usize },
}

/// Which conditions `construct_equivalent_with` insists on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admissibility {
    /// All five conditions, with i and ii as literal inequalities.
    Literal,
    /// Only what the construction needs: distinct real eigenvalues,
    /// non-singular `C_εε` and `A_εε` (iii, v), and a non-negative Λ (iv).
    Operational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionId {
    I,
    Ii,
    Iii,
    Iv,
    V,
}

impl ConditionId {
    pub const ALL: [ConditionId; 5] =
        [ConditionId::I, ConditionId::Ii, ConditionId::Iii, ConditionId::Iv, ConditionId::V];
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionId::I => "i",
            ConditionId::Ii => "ii",
            ConditionId::Iii => "iii",
            ConditionId::Iv => "iv",
            ConditionId::V => "v",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEntry {
    pub id: ConditionId,
    pub passed: bool,
    /// Offending symbol block, when failed.
    pub symbol: Option<usize>,
    /// Offending row indices inside the block (0-based), when failed.
    pub indices: Vec<usize>,
    /// Minimal slack of the inequality; `None` when vacuous or not computable.
    pub margin: Option<f64>,
    pub detail: String,
}

/// Outcome of conditions i–v, always in that order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn get(&self, id: ConditionId) -> &ConditionEntry {
        self.entries.iter().find(|e| e.id == id).expect("report holds all five conditions")
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let status = if e.passed { "pass" } else { "FAIL" };
            write!(f, "  ({}) {status}", e.id)?;
            if let Some(m) = e.margin {
                write!(f, " margin={m:.6e}")?;
            }
            if !e.detail.is_empty() {
                write!(f, " {}", e.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// The block-diagonal similarity transform `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformW {
    /// `W_εε` per symbol.
    pub blocks: Vec<DMatrix<f64>>,
    /// `λ_εε(1..n(ε))` per symbol, in the order used for Λ's diagonal.
    pub eigenvalues: Vec<Vec<f64>>,
    /// 2-norm condition number of each block.
    pub condition_numbers: Vec<f64>,
}

impl TransformW {
    /// Full N×N block-diagonal matrix.
    pub fn assemble(&self) -> DMatrix<f64> {
        assemble_blocks(&self.blocks)
    }

    pub fn is_identity(&self) -> bool {
        self.blocks.iter().all(|b| *b == DMatrix::identity(b.nrows(), b.ncols()))
    }
}

fn assemble_blocks(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Eigen-structure of one within-symbol block.
#[derive(Debug, Clone)]
struct BlockSpectrum {
    /// Real eigenvalues in Λ order.
    eigenvalues: Vec<f64>,
    /// Left eigenvectors as unit-norm rows, sign chosen so row sums are ≥ 0.
    left: DMatrix<f64>,
    /// Block was already diagonal; `left` is the identity.
    diagonal: bool,
}

enum SpectrumOutcome {
    Real(BlockSpectrum),
    Complex { imag: f64 },
}

fn block_spectrum(block: &DMatrix<f64>) -> Result<SpectrumOutcome, EquivalenceError> {
    let n = block.nrows();
    let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || block[(i, j)] == 0.0));
    if is_diagonal {
        return Ok(SpectrumOutcome::Real(BlockSpectrum {
            eigenvalues: (0..n).map(|i| block[(i, i)]).collect(),
            left: DMatrix::identity(n, n),
            diagonal: true,
        }));
    }

    let schur = Schur::try_new(block.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or_else(|| {
        EquivalenceError::NumericalFailure("Schur decomposition did not converge".into())
    })?;
    let complex = schur.complex_eigenvalues();
    let imag = complex.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > IMAG_TOL {
        return Ok(SpectrumOutcome::Complex { imag });
    }
    let mut eigenvalues: Vec<f64> = complex.iter().map(|z| z.re).collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));

    let mut left = DMatrix::zeros(n, n);
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        let row = left_null_vector(block, lambda)?;
        let sign = if row.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            left[(k, j)] = sign * row[j];
        }
    }
    Ok(SpectrumOutcome::Real(BlockSpectrum { eigenvalues, left, diagonal: false }))
}

/// Unit vector `v` minimising `|v (A − λI)|`, i.e. the left eigenvector for λ.
fn left_null_vector(a: &DMatrix<f64>, lambda: f64) -> Result<Vec<f64>, EquivalenceError> {
    let n = a.nrows();
    let shifted = a.transpose() - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| EquivalenceError::NumericalFailure("SVD produced no right vectors".into()))?;
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("non-empty block");
    Ok(v_t.row(k).iter().copied().collect())
}

fn singular_values(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (min, max)
}

fn min_eigen_gap(eigenvalues: &[f64]) -> Option<f64> {
    eigenvalues.windows(2).map(|w| (w[0] - w[1]).abs()).reduce(f64::min)
}

struct Construction {
    lambda: DMatrix<f64>,
    w: TransformW,
    w_full: DMatrix<f64>,
    w_inv: DMatrix<f64>,
}

/// Builds W and the raw Λ = W A W⁻¹ from real spectra. No conditions checked.
fn build(
    model: &PartitionedModel,
    spectra: &[BlockSpectrum],
) -> Result<Construction, EquivalenceError> {
    let mut blocks = Vec::with_capacity(spectra.len());
    let mut inv_blocks = Vec::with_capacity(spectra.len());
    let mut condition_numbers = Vec::with_capacity(spectra.len());
    for (k, s) in spectra.iter().enumerate() {
        let n = s.left.nrows();
        let w = if s.diagonal {
            DMatrix::identity(n, n)
        } else {
            let mut w = s.left.clone();
            for r in 0..n {
                let sum: f64 = w.row(r).sum();
                if sum.abs() < f64::MIN_POSITIVE {
                    return Err(EquivalenceError::NumericalFailure(format!(
                        "normaliser C is singular in symbol block {k}"
                    )));
                }
                w.row_mut(r).scale_mut(1.0 / sum);
            }
            w
        };
        let (min, max) = singular_values(&w);
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(cond <= MAX_CONDITION) {
            return Err(EquivalenceError::NumericalFailure(format!(
                "W block of symbol {k} is ill-conditioned (cond = {cond:e})"
            )));
        }
        let inv = if s.diagonal {
            DMatrix::identity(n, n)
        } else {
            w.clone().try_inverse().ok_or_else(|| {
                EquivalenceError::NumericalFailure(format!("W block of symbol {k} is singular"))
            })?
        };
        blocks.push(w);
        inv_blocks.push(inv);
        condition_numbers.push(cond);
    }
    let w_full = assemble_blocks(&blocks);
    let w_inv = assemble_blocks(&inv_blocks);
    let lambda = &w_full * model.transition() * &w_inv;
    let eigenvalues = spectra.iter().map(|s| s.eigenvalues.clone()).collect();
    Ok(Construction {
        lambda,
        w: TransformW { blocks, eigenvalues, condition_numbers },
        w_full,
        w_inv,
    })
}

fn ensure_valid(model: &PartitionedModel) -> Result<(), EquivalenceError> {
    let violations = validate_model(model)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ModelError::Invalid(violations).into())
    }
}

fn entry(id: ConditionId) -> ConditionEntry {
    ConditionEntry { id, passed: true, symbol: None, indices: Vec::new(), margin: None, detail: String::new() }
}

fn lower_margin(e: &mut ConditionEntry, value: f64) {
    e.margin = Some(e.margin.map_or(value, |m| m.min(value)));
}

fn fail(e: &mut ConditionEntry, symbol: usize, indices: Vec<usize>, detail: String) {
    if e.passed {
        e.passed = false;
        e.symbol = Some(symbol);
        e.indices = indices;
        e.detail = detail;
    }
}

/// Evaluates admissibility conditions i–v on every within-symbol block.
pub fn check_conditions(model: &PartitionedModel) -> Result<ConditionReport, EquivalenceError> {
    ensure_valid(model)?;
    let d = model.partition().num_symbols();
    let mut spectra = Vec::with_capacity(d);
    for k in 0..d {
        spectra.push(block_spectrum(&model.block(k, k))?);
    }
    Ok(evaluate(model, &spectra))
}

fn evaluate(model: &PartitionedModel, spectra: &[SpectrumOutcome]) -> ConditionReport {
    let partition = model.partition();
    let mut c1 = entry(ConditionId::I);
    let mut c2 = entry(ConditionId::Ii);
    let mut c3 = entry(ConditionId::Iii);
    let mut c4 = entry(ConditionId::Iv);
    let mut c5 = entry(ConditionId::V);

    for k in 0..partition.num_symbols() {
        let a = model.block(k, k);
        let n = a.nrows();
        let state0 = partition.range(k).start;
        let off = |r: usize| (0..n).filter(|&j| j != r).map(|j| a[(r, j)]).sum::<f64>();
        let row_sum = |r: usize| a.row(r).sum();

        // i: diagonal dominance inside the block
        if n > 1 {
            for j in 0..n {
                let slack = a[(j, j)] - off(j);
                lower_margin(&mut c1, slack);
                if slack < -1e-12 {
                    fail(
                        &mut c1,
                        k,
                        vec![j],
                        format!(
                            "block {k} row {j} (state {}): diagonal {} < off-diagonal sum {}",
                            state0 + j,
                            a[(j, j)],
                            off(j)
                        ),
                    );
                }
            }
        }

        // ii: for A(s,s) > A(r,r), row sum of r ≤ A(s,s) − off-diagonal sum of s
        for s in 0..n {
            for r in 0..n {
                if a[(s, s)] > a[(r, r)] {
                    let slack = a[(s, s)] - off(s) - row_sum(r);
                    lower_margin(&mut c2, slack);
                    if slack < -1e-12 {
                        fail(
                            &mut c2,
                            k,
                            vec![r, s],
                            format!(
                                "block {k}: row {r} sum {} exceeds row {s} dominance slack {}",
                                row_sum(r),
                                a[(s, s)] - off(s)
                            ),
                        );
                    }
                }
            }
        }
        match &spectra[k] {
            SpectrumOutcome::Complex { imag } => {
                fail(&mut c2, k, Vec::new(), format!("block {k} has complex eigenvalues (|Im| = {imag:e})"));
                fail(&mut c3, k, Vec::new(), format!("block {k} has no real eigenbasis"));
            }
            SpectrumOutcome::Real(s) => {
                if let Some(gap) = min_eigen_gap(&s.eigenvalues) {
                    if gap < EIGEN_GAP_TOL {
                        fail(
                            &mut c2,
                            k,
                            Vec::new(),
                            format!("block {k} has repeated eigenvalues (gap {gap:e})"),
                        );
                    }
                }
                // iii: C = diag(V·1) non-singular, scale-free via unit-norm rows
                let sums: Vec<f64> = (0..n).map(|r| s.left.row(r).sum().abs()).collect();
                let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
                let max = sums.iter().copied().fold(0.0, f64::max);
                lower_margin(&mut c3, min);
                let cond = if min > 0.0 { max / min } else { f64::INFINITY };
                if min < 1e-10 || cond > MAX_CONDITION {
                    let worst = sums
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    fail(
                        &mut c3,
                        k,
                        vec![worst],
                        format!("block {k}: normaliser C is singular (|C| entry {min:e}, cond {cond:e})"),
                    );
                }
            }
        }

        // v: A_εε non-singular
        let (smin, smax) = singular_values(&a);
        lower_margin(&mut c5, smin);
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if smin < 1e-12 || cond > MAX_CONDITION {
            fail(&mut c5, k, Vec::new(), format!("block {k} is singular (σ_min {smin:e}, cond {cond:e})"));
        }
    }

    // iv: off-diagonal blocks of the constructed Λ are non-negative
    let real: Option<Vec<BlockSpectrum>> = spectra
        .iter()
        .map(|s| match s {
            SpectrumOutcome::Real(b) => Some(b.clone()),
            SpectrumOutcome::Complex { .. } => None,
        })
        .collect();
    match real.map(|r| build(model, &r)) {
        None => {
            c4.passed = false;
            c4.detail = "construction impossible: complex eigenvalues".into();
        }
        Some(Err(e)) => {
            c4.passed = false;
            c4.detail = format!("construction impossible: {e}");
        }
        Some(Ok(built)) => {
            let d = partition.num_symbols();
            for from in 0..d {
                for to in (0..d).filter(|&to| to != from) {
                    for i in partition.range(from) {
                        for j in partition.range(to) {
                            let v = built.lambda[(i, j)];
                            lower_margin(&mut c4, v);
                            if v < -CONSTRUCTION_TOL {
                                fail(
                                    &mut c4,
                                    from,
                                    vec![i, j],
                                    format!("Λ({i},{j}) = {v:e} is negative (block {from}→{to})"),
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    ConditionReport { entries: vec![c1, c2, c3, c4, c5] }
}

/// Builds the block-diagonal equivalent Λ requiring all five conditions.
pub fn construct_equivalent(
    model: &PartitionedModel,
) -> Result<(PartitionedModel, TransformW), EquivalenceError> {
    construct_equivalent_with(model, Admissibility::Literal)
}

/// Builds the block-diagonal equivalent Λ under the chosen admissibility.
pub fn construct_equivalent_with(
    model: &PartitionedModel,
    admissibility: Admissibility,
) -> Result<(PartitionedModel, TransformW), EquivalenceError> {
    ensure_valid(model)?;
    let partition = model.partition();
    let d = partition.num_symbols();
    let mut outcomes = Vec::with_capacity(d);
    for k in 0..d {
        let outcome = block_spectrum(&model.block(k, k))?;
        if let SpectrumOutcome::Complex { imag } = outcome {
            return Err(EquivalenceError::ComplexEigenvalues { symbol: k, imag });
        }
        outcomes.push(outcome);
    }
    let report = evaluate(model, &outcomes);
    let required_ok = match admissibility {
        Admissibility::Literal => report.passed(),
        Admissibility::Operational => {
            let gaps_ok = outcomes.iter().all(|o| match o {
                SpectrumOutcome::Real(s) => min_eigen_gap(&s.eigenvalues).map_or(true, |g| g >= EIGEN_GAP_TOL),
                SpectrumOutcome::Complex { .. } => false,
            });
            gaps_ok
                && [ConditionId::Iii, ConditionId::Iv, ConditionId::V]
                    .iter()
                    .all(|&id| report.get(id).passed)
        }
    };
    if !required_ok {
        return Err(EquivalenceError::ConditionViolation(Box::new(report)));
    }
    let spectra: Vec<BlockSpectrum> = outcomes
        .into_iter()
        .map(|o| match o {
            SpectrumOutcome::Real(s) => s,
            SpectrumOutcome::Complex { .. } => unreachable!("rejected above"),
        })
        .collect();
    let Construction { mut lambda, w, w_full, w_inv } = build(model, &spectra)?;
    let n = model.num_states();
    let identity = w.is_identity();
    if identity {
        lambda = model.transition().clone();
    }

    // within-symbol blocks must come out diagonal; zero the round-off
    for k in 0..d {
        let r = partition.range(k);
        for i in r.clone() {
            for j in r.clone() {
                if i != j {
                    if lambda[(i, j)].abs() > CONSTRUCTION_TOL {
                        return Err(EquivalenceError::NonStochasticResult(format!(
                            "within-symbol entry Λ({i},{j}) = {:e} is not zero",
                            lambda[(i, j)]
                        )));
                    }
                    lambda[(i, j)] = 0.0;
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let v = lambda[(i, j)];
            if v < -CONSTRUCTION_TOL {
                return Err(EquivalenceError::NonStochasticResult(format!("Λ({i},{j}) = {v:e}")));
            }
            if v < 0.0 {
                lambda[(i, j)] = 0.0;
            }
        }
        let sum: f64 = lambda.row(i).sum();
        if (sum - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(EquivalenceError::NonStochasticResult(format!("row {i} sums to {sum}")));
        }
        if !identity {
            lambda.row_mut(i).scale_mut(1.0 / sum);
        }
    }

    let ones_residual = (0..n)
        .map(|i| (w_full.row(i).sum() - 1.0).abs())
        .fold(0.0, f64::max);
    if ones_residual > CONSTRUCTION_TOL {
        return Err(EquivalenceError::NumericalFailure(format!(
            "W·1 deviates from 1 by {ones_residual:e}"
        )));
    }

    let p = model.stationary();
    let mut pi: Vec<f64> = (0..n).map(|j| (0..n).map(|i| p[i] * w_inv[(i, j)]).sum()).collect();
    for v in pi.iter_mut() {
        if *v < 0.0 && *v >= -CONSTRUCTION_TOL {
            *v = 0.0;
        }
    }
    let residual = stationarity_residual(&lambda, &pi);
    if residual > CONSTRUCTION_TOL {
        return Err(EquivalenceError::NonStochasticResult(format!(
            "π = pW⁻¹ is not stationary for Λ (residual {residual:e})"
        )));
    }

    let out = PartitionedModel::new(
        model.alphabet().clone(),
        partition.clone(),
        lambda,
        Some(pi),
        ModelKind::BlockDiagonal,
    )
    .map_err(|e| match e {
        ModelError::Invalid(v) => EquivalenceError::NonStochasticResult(
            v.iter().map(Violation::to_string).collect::<Vec<_>>().join("; "),
        ),
        other => other.into(),
    })?;
    Ok((out, w))
}

/// Maximum relative likelihood discrepancy `|P(E|a) − P(E|b)| / max(P(E|a), 1e-300)`
/// over every sequence of length `1..=max_len`.
pub fn verify_equivalence(
    a: &PartitionedModel,
    b: &PartitionedModel,
    max_len: usize,
) -> Result<f64, EquivalenceError> {
    if a.alphabet() != b.alphabet() {
        return Err(EquivalenceError::AlphabetMismatch);
    }
    let d = a.alphabet().len();
    let too_large = (d as f64).powi(max_len as i32) > (1u64 << 24) as f64;
    if too_large {
        return Err(EquivalenceError::EnumerationTooLarge { symbols: d, max_len });
    }
    if max_len == 0 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    let mut stack: Vec<(Vec<f64>, Vec<f64>, usize)> = (0..d)
        .map(|k| (restrict(a, a.stationary(), k), restrict(b, b.stationary(), k), 1))
        .collect();
    while let Some((fa, fb, len)) = stack.pop() {
        let pa: f64 = fa.iter().sum();
        let pb: f64 = fb.iter().sum();
        if pa != pb {
            worst = worst.max((pa - pb).abs() / pa.max(1e-300));
        }
        if len < max_len {
            for k in 0..d {
                stack.push((step(a, &fa, k), step(b, &fb, k), len + 1));
            }
        }
    }
    Ok(worst)
}

fn restrict(model: &PartitionedModel, v: &[f64], symbol: usize) -> Vec<f64> {
    let r = model.partition().range(symbol);
    v.iter().enumerate().map(|(i, &x)| if r.contains(&i) { x } else { 0.0 }).collect()
}

fn step(model: &PartitionedModel, alpha: &[f64], symbol: usize) -> Vec<f64> {
    let t = model.transition();
    let n = alpha.len();
    let r = model.partition().range(symbol);
    (0..n)
        .map(|j| if r.contains(&j) { (0..n).map(|i| alpha[i] * t[(i, j)]).sum() } else { 0.0 })
        .collect()
}
