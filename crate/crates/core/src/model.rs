//! Partitioned Markov models: states grouped by the symbol they emit.
//!
//! States are laid out block by block in alphabet order, so state indices
//! `0..n(ε₁)` emit the first symbol, the next `n(ε₂)` emit the second, and
//! so on. A model is either `General` (arbitrary within-symbol blocks) or
//! `BlockDiagonal` (every within-symbol block is a diagonal matrix).

use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stationary::solve_stationary;

/// Row-sum tolerance applied to stored transition matrices.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Row-sum tolerance for matrices that are the result of arithmetic.
pub const ARITHMETIC_ROW_SUM_TOL: f64 = 1e-9;
/// ∞-norm tolerance on `π·T − π`.
pub const STATIONARY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("model violates {} invariant(s): {}", .0.len(), join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("transition matrix is not row-stochastic: {}", join_violations(.0))]
    NonStochastic(Vec<Violation>),
    #[error("chain is not regular: no power up to {max_power} is entrywise positive")]
    NotRegular { max_power: usize },
    #[error("stationary distribution is not unique (singular system)")]
    SingularStationarySystem,
    #[error("sequence length must be at least 1")]
    ZeroLength,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Ordered set of single-character symbols. The order fixes block order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolAlphabet {
    symbols: Vec<char>,
}

impl SymbolAlphabet {
    pub fn new(symbols: Vec<char>) -> Result<Self, ModelError> {
        if symbols.is_empty() {
            return Err(ModelError::InvalidAlphabet("alphabet is empty".into()));
        }
        for (i, &s) in symbols.iter().enumerate() {
            if !s.is_ascii_graphic() || s == '^' || s == '#' {
                return Err(ModelError::InvalidAlphabet(format!(
                    "symbol {s:?} is not a printable ASCII character usable in sequence files"
                )));
            }
            if symbols[..i].contains(&s) {
                return Err(ModelError::InvalidAlphabet(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Self { symbols })
    }

    /// The `{'0', '1'}` alphabet: error-free and error.
    pub fn binary() -> Self {
        Self { symbols: vec!['0', '1'] }
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, symbol: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == symbol)
    }

    pub fn symbol(&self, index: usize) -> char {
        self.symbols[index]
    }

    pub fn is_binary(&self) -> bool {
        self.symbols == ['0', '1']
    }
}

/// Number of states per symbol, in alphabet order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StatePartition {
    counts: Vec<usize>,
    offsets: Vec<usize>,
}

impl StatePartition {
    pub fn new(counts: Vec<usize>) -> Result<Self, ModelError> {
        if counts.is_empty() {
            return Err(ModelError::InvalidPartition("partition is empty".into()));
        }
        if let Some(k) = counts.iter().position(|&n| n == 0) {
            return Err(ModelError::InvalidPartition(format!(
                "symbol block {k} has no states"
            )));
        }
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &n in &counts {
            acc += n;
            offsets.push(acc);
        }
        Ok(Self { counts, offsets })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_symbols(&self) -> usize {
        self.counts.len()
    }

    /// Total number of states N.
    pub fn total(&self) -> usize {
        self.offsets[self.counts.len()]
    }

    /// State indices emitting symbol `k`.
    pub fn range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Emission map f(state).
    pub fn symbol_of(&self, state: usize) -> usize {
        debug_assert!(state < self.total());
        // offsets is sorted; partition_point finds the first block end past `state`
        self.offsets[1..].partition_point(|&end| end <= state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    General,
    BlockDiagonal,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::General => f.write_str("general"),
            ModelKind::BlockDiagonal => f.write_str("block-diagonal"),
        }
    }
}

/// One broken invariant of a [`PartitionedModel`]. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    NonFinite { row: usize, col: usize },
    NegativeEntry { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    OffDiagonalInBlock { symbol: usize, row: usize, col: usize, value: f64 },
    StationaryNegative { index: usize, value: f64 },
    StationarySum { sum: f64 },
    NonStationary { deviation: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { row, col } => write!(f, "entry ({row},{col}) is not finite"),
            Violation::NegativeEntry { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} is negative")
            }
            Violation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            Violation::OffDiagonalInBlock { symbol, row, col, value } => write!(
                f,
                "block-diagonal model has off-diagonal entry ({row},{col}) = {value} in symbol block {symbol}"
            ),
            Violation::StationaryNegative { index, value } => {
                write!(f, "stationary entry {index} = {value} is negative")
            }
            Violation::StationarySum { sum } => write!(f, "stationary vector sums to {sum}"),
            Violation::NonStationary { deviation } => {
                write!(f, "|π·T − π|∞ = {deviation:e} exceeds tolerance")
            }
        }
    }
}

/// Deterministic d×N emission matrix B: `rows[k][i] = 1` iff state i emits symbol k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmissionMatrix {
    pub rows: Vec<Vec<u8>>,
}

impl EmissionMatrix {
    pub fn from_partition(partition: &StatePartition) -> Self {
        let n = partition.total();
        let rows = (0..partition.num_symbols())
            .map(|k| {
                let range = partition.range(k);
                (0..n).map(|i| u8::from(range.contains(&i))).collect()
            })
            .collect();
        Self { rows }
    }

    /// Every column holds exactly one 1.
    pub fn is_deterministic(&self) -> bool {
        let n = self.rows.first().map_or(0, Vec::len);
        (0..n).all(|i| self.rows.iter().map(|r| u32::from(r[i])).sum::<u32>() == 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedModel {
    alphabet: SymbolAlphabet,
    partition: StatePartition,
    transition: DMatrix<f64>,
    stationary: Vec<f64>,
    kind: ModelKind,
}

impl PartitionedModel {
    /// Builds and validates a model. When `stationary` is `None` it is
    /// solved from the transition matrix.
    pub fn new(
        alphabet: SymbolAlphabet,
        partition: StatePartition,
        transition: DMatrix<f64>,
        stationary: Option<Vec<f64>>,
        kind: ModelKind,
    ) -> Result<Self, ModelError> {
        check_dimensions(&alphabet, &partition, &transition, stationary.as_deref())?;
        let stationary = match stationary {
            Some(s) => s,
            None => {
                let violations = stochastic_violations(&transition, ROW_SUM_TOL);
                if !violations.is_empty() {
                    return Err(ModelError::Invalid(violations));
                }
                solve_stationary(&transition)?
            }
        };
        let model = Self { alphabet, partition, transition, stationary, kind };
        let violations = validate_model(&model)?;
        if violations.is_empty() {
            Ok(model)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    /// Assembles a model without checking any invariant. Use
    /// [`validate_model`] to inspect it.
    pub fn new_unchecked(
        alphabet: SymbolAlphabet,
        partition: StatePartition,
        transition: DMatrix<f64>,
        stationary: Vec<f64>,
        kind: ModelKind,
    ) -> Self {
        Self { alphabet, partition, transition, stationary, kind }
    }

    /// Binary-alphabet convenience constructor from row-major rows.
    pub fn binary(
        counts: [usize; 2],
        rows: &[&[f64]],
        kind: ModelKind,
    ) -> Result<Self, ModelError> {
        let partition = StatePartition::new(counts.to_vec())?;
        let transition = matrix_from_rows(rows)?;
        Self::new(SymbolAlphabet::binary(), partition, transition, None, kind)
    }

    pub fn alphabet(&self) -> &SymbolAlphabet {
        &self.alphabet
    }

    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn num_states(&self) -> usize {
        self.partition.total()
    }

    pub fn emission(&self) -> EmissionMatrix {
        EmissionMatrix::from_partition(&self.partition)
    }

    /// Block `A_{εμ}` as an owned matrix.
    pub fn block(&self, from: usize, to: usize) -> DMatrix<f64> {
        let r = self.partition.range(from);
        let c = self.partition.range(to);
        self.transition.view((r.start, c.start), (r.len(), c.len())).into_owned()
    }

    /// True when every within-symbol block has exactly-zero off-diagonals.
    pub fn has_diagonal_blocks(&self) -> bool {
        (0..self.partition.num_symbols()).all(|k| {
            let r = self.partition.range(k);
            r.clone().all(|i| r.clone().all(|j| i == j || self.transition[(i, j)] == 0.0))
        })
    }

    /// Stationary probability mass on states emitting symbol `k`.
    pub fn symbol_probability(&self, k: usize) -> f64 {
        self.partition.range(k).map(|i| self.stationary[i]).sum()
    }
}

pub fn matrix_from_rows(rows: &[&[f64]]) -> Result<DMatrix<f64>, ModelError> {
    let n = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(ModelError::DimensionMismatch(format!(
            "row {bad} has {} entries, expected {n}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_dimensions(
    alphabet: &SymbolAlphabet,
    partition: &StatePartition,
    transition: &DMatrix<f64>,
    stationary: Option<&[f64]>,
) -> Result<(), ModelError> {
    if partition.num_symbols() != alphabet.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "partition has {} blocks but alphabet has {} symbols",
            partition.num_symbols(),
            alphabet.len()
        )));
    }
    let n = partition.total();
    if transition.nrows() != n || transition.ncols() != n {
        return Err(ModelError::DimensionMismatch(format!(
            "transition is {}x{}, partition total is {n}",
            transition.nrows(),
            transition.ncols()
        )));
    }
    if let Some(s) = stationary {
        if s.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "stationary vector has length {}, expected {n}",
                s.len()
            )));
        }
    }
    Ok(())
}

/// Entry and row-sum violations of a square matrix.
pub fn stochastic_violations(t: &DMatrix<f64>, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for i in 0..t.nrows() {
        let mut sum = 0.0;
        let mut finite = true;
        for j in 0..t.ncols() {
            let v = t[(i, j)];
            if !v.is_finite() {
                out.push(Violation::NonFinite { row: i, col: j });
                finite = false;
            } else if v < 0.0 {
                out.push(Violation::NegativeEntry { row: i, col: j, value: v });
            }
            sum += v;
        }
        if finite && (sum - 1.0).abs() > tol {
            out.push(Violation::RowSum { row: i, sum });
        }
    }
    out
}

/// Returns every invariant violation of `model`; empty means valid.
///
/// Stationarity is only checked once the transition matrix itself is
/// stochastic, since `π·T = π` is meaningless otherwise.
pub fn validate_model(model: &PartitionedModel) -> Result<Vec<Violation>, ModelError> {
    check_dimensions(
        &model.alphabet,
        &model.partition,
        &model.transition,
        Some(&model.stationary),
    )?;
    let t = &model.transition;
    let mut out = stochastic_violations(t, ROW_SUM_TOL);
    let stochastic = out.is_empty();

    if model.kind == ModelKind::BlockDiagonal {
        for k in 0..model.partition.num_symbols() {
            let r = model.partition.range(k);
            for i in r.clone() {
                for j in r.clone() {
                    if i != j && t[(i, j)] != 0.0 {
                        out.push(Violation::OffDiagonalInBlock {
                            symbol: k,
                            row: i,
                            col: j,
                            value: t[(i, j)],
                        });
                    }
                }
            }
        }
    }

    let pi = &model.stationary;
    for (i, &v) in pi.iter().enumerate() {
        if !(v >= 0.0) {
            out.push(Violation::StationaryNegative { index: i, value: v });
        }
    }
    let sum: f64 = pi.iter().sum();
    if !((sum - 1.0).abs() <= STATIONARY_TOL) {
        out.push(Violation::StationarySum { sum });
    }
    if stochastic {
        let deviation = stationarity_residual(t, pi);
        if !(deviation <= STATIONARY_TOL) {
            out.push(Violation::NonStationary { deviation });
        }
    }
    Ok(out)
}

/// `|π·T − π|∞`.
pub fn stationarity_residual(t: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = pi.len();
    (0..n)
        .map(|j| {
            let v: f64 = (0..n).map(|i| pi[i] * t[(i, j)]).sum();
            (v - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}
