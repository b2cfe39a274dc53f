//! Run-length form of error sequences and sequence statistics.

use std::fmt;

use thiserror::Error;

use crate::model::SymbolAlphabet;

#[derive(Debug, Error, PartialEq)]
pub enum RleError {
    #[error("unknown symbol {found:?} at position {position}")]
    UnknownSymbol { position: usize, found: char },
    #[error("sequence is empty")]
    Empty,
    #[error("invalid run {index}: {reason}")]
    InvalidRun { index: usize, reason: String },
    #[error("operation requires the binary alphabet ['0', '1']")]
    NonBinaryAlphabet,
    #[error("no error symbol is followed by another symbol; error-free run distribution is undefined")]
    NoConditioningEvents,
    #[error("malformed run-length token {token:?}: {reason}")]
    BadToken { token: String, reason: String },
}

/// A maximal run: `count` consecutive copies of alphabet symbol `symbol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub symbol: usize,
    pub count: usize,
}

/// A sequence stored as maximal runs `μ₁^{m₁} μ₂^{m₂} … μ_C^{m_C}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLengthSequence {
    alphabet: SymbolAlphabet,
    runs: Vec<Run>,
    total_length: usize,
}

impl RunLengthSequence {
    /// Validates runs: non-empty, counts ≥ 1, known symbols, adjacent runs distinct.
    pub fn new(alphabet: SymbolAlphabet, runs: Vec<Run>) -> Result<Self, RleError> {
        if runs.is_empty() {
            return Err(RleError::Empty);
        }
        for (index, run) in runs.iter().enumerate() {
            if run.count == 0 {
                return Err(RleError::InvalidRun { index, reason: "count is zero".into() });
            }
            if run.symbol >= alphabet.len() {
                return Err(RleError::InvalidRun {
                    index,
                    reason: format!("symbol index {} outside alphabet", run.symbol),
                });
            }
            if index > 0 && runs[index - 1].symbol == run.symbol {
                return Err(RleError::InvalidRun {
                    index,
                    reason: "repeats the previous run's symbol".into(),
                });
            }
        }
        let total_length = runs.iter().map(|r| r.count).sum();
        Ok(Self { alphabet, runs, total_length })
    }

    /// Encodes a sequence of symbol indices, merging repeats into maximal runs.
    pub fn from_symbols(alphabet: SymbolAlphabet, symbols: &[usize]) -> Result<Self, RleError> {
        let mut runs: Vec<Run> = Vec::new();
        for (position, &s) in symbols.iter().enumerate() {
            if s >= alphabet.len() {
                return Err(RleError::InvalidRun {
                    index: position,
                    reason: format!("symbol index {s} outside alphabet"),
                });
            }
            match runs.last_mut() {
                Some(last) if last.symbol == s => last.count += 1,
                _ => runs.push(Run { symbol: s, count: 1 }),
            }
        }
        Self::new(alphabet, runs)
    }

    pub fn alphabet(&self) -> &SymbolAlphabet {
        &self.alphabet
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    /// Number of runs C.
    pub fn num_runs(&self) -> usize {
        self.runs.len()
    }

    /// Number of symbols T.
    pub fn total_length(&self) -> usize {
        self.total_length
    }

    /// Expands to symbol indices.
    pub fn symbols(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.total_length);
        for run in &self.runs {
            out.extend(std::iter::repeat(run.symbol).take(run.count));
        }
        out
    }

    /// Same runs with every count multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        let runs = self.runs.iter().map(|r| Run { symbol: r.symbol, count: r.count * factor }).collect();
        Self::new(self.alphabet.clone(), runs).expect("scaling preserves run invariants")
    }
}

impl fmt::Display for RunLengthSequence {
    /// `sym^count` tokens separated by single spaces.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, run) in self.runs.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}^{}", self.alphabet.symbol(run.symbol), run.count)?;
        }
        Ok(())
    }
}

/// Maximal-run encoding of a symbol string.
pub fn encode(sequence: &str, alphabet: &SymbolAlphabet) -> Result<RunLengthSequence, RleError> {
    let mut runs: Vec<Run> = Vec::new();
    for (position, c) in sequence.chars().enumerate() {
        let symbol = alphabet
            .index_of(c)
            .ok_or(RleError::UnknownSymbol { position, found: c })?;
        match runs.last_mut() {
            Some(last) if last.symbol == symbol => last.count += 1,
            _ => runs.push(Run { symbol, count: 1 }),
        }
    }
    RunLengthSequence::new(alphabet.clone(), runs)
}

/// Expands runs back into the symbol string.
pub fn decode(runs: &RunLengthSequence) -> String {
    let mut out = String::with_capacity(runs.total_length());
    for run in runs.runs() {
        let c = runs.alphabet().symbol(run.symbol);
        out.extend(std::iter::repeat(c).take(run.count));
    }
    out
}

/// Fraction of error symbols (`'1'`) in a binary sequence.
pub fn error_probability(runs: &RunLengthSequence) -> Result<f64, RleError> {
    let error = binary_error_index(runs)?;
    let ones: usize = runs.runs().iter().filter(|r| r.symbol == error).map(|r| r.count).sum();
    Ok(ones as f64 / runs.total_length() as f64)
}

fn binary_error_index(runs: &RunLengthSequence) -> Result<usize, RleError> {
    if runs.alphabet().is_binary() {
        Ok(1)
    } else {
        Err(RleError::NonBinaryAlphabet)
    }
}

/// Error-free run distribution `Pr(0^m | 1)` for `m = 0..=m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct EfrdTable {
    /// `values[m]`; `values[0] = 1`.
    pub values: Vec<f64>,
    /// Largest observed gap.
    pub m_max: usize,
    /// Number of conditioning error positions (errors not at the final position).
    pub sample_count: usize,
    /// `exceed_counts[m]`: conditioning positions followed by at least `m` zeros.
    pub exceed_counts: Vec<usize>,
}

impl EfrdTable {
    /// `Pr(0^m | 1)`, zero beyond `m_max`.
    pub fn value(&self, m: usize) -> f64 {
        self.values.get(m).copied().unwrap_or(0.0)
    }

    /// `max_m |self(m) − other(m)|` over `m ≤ limit`, or over both supports when `limit` is `None`.
    pub fn max_deviation(&self, other: &EfrdTable, limit: Option<usize>) -> f64 {
        let upper = limit.unwrap_or(self.m_max.max(other.m_max));
        (0..=upper)
            .map(|m| (self.value(m) - other.value(m)).abs())
            .fold(0.0, f64::max)
    }
}

/// Error-free run distribution computed on the runs without expanding them.
///
/// Every `'1'` not at the last position is a conditioning event; its gap is
/// the number of `'0'`s immediately following it. Inside a run of `k` ones the
/// first `k − 1` have gap 0 and the last has the length of the next zero run.
pub fn efrd(runs: &RunLengthSequence) -> Result<EfrdTable, RleError> {
    let error = binary_error_index(runs)?;
    let all = runs.runs();
    let mut gap_histogram: Vec<usize> = vec![0];
    let mut sample_count = 0usize;
    for (c, run) in all.iter().enumerate() {
        if run.symbol != error {
            continue;
        }
        match all.get(c + 1) {
            Some(next) => {
                sample_count += run.count;
                gap_histogram[0] += run.count - 1;
                let gap = next.count;
                if gap_histogram.len() <= gap {
                    gap_histogram.resize(gap + 1, 0);
                }
                gap_histogram[gap] += 1;
            }
            None => {
                sample_count += run.count - 1;
                gap_histogram[0] += run.count - 1;
            }
        }
    }
    if sample_count == 0 {
        return Err(RleError::NoConditioningEvents);
    }
    let m_max = gap_histogram.len() - 1;
    let mut exceed_counts = vec![0usize; m_max + 1];
    let mut acc = 0usize;
    for m in (0..=m_max).rev() {
        acc += gap_histogram[m];
        exceed_counts[m] = acc;
    }
    let values = exceed_counts.iter().map(|&k| k as f64 / sample_count as f64).collect();
    Ok(EfrdTable { values, m_max, sample_count, exceed_counts })
}

/// Parses whitespace-separated `sym^count` tokens. Adjacent tokens with the
/// same symbol are merged.
pub fn parse_run_length_text(
    text: &str,
    alphabet: &SymbolAlphabet,
) -> Result<RunLengthSequence, RleError> {
    let mut runs: Vec<Run> = Vec::new();
    for token in text.split_whitespace() {
        let bad = |reason: &str| RleError::BadToken { token: token.to_string(), reason: reason.into() };
        let (sym, count) = token.split_once('^').ok_or_else(|| bad("missing '^'"))?;
        let mut chars = sym.chars();
        let c = match (chars.next(), chars.next()) {
            (Some(c), None) => c,
            _ => return Err(bad("symbol must be a single character")),
        };
        let symbol = alphabet.index_of(c).ok_or_else(|| bad("symbol not in alphabet"))?;
        let count: usize = count.parse().map_err(|_| bad("count is not a non-negative integer"))?;
        if count == 0 {
            return Err(bad("count must be at least 1"));
        }
        match runs.last_mut() {
            Some(last) if last.symbol == symbol => last.count += count,
            _ => runs.push(Run { symbol, count }),
        }
    }
    RunLengthSequence::new(alphabet.clone(), runs)
}

/// Reads a sequence file body: either one character per symbol (whitespace
/// and line breaks ignored) or `sym^count` run-length tokens.
pub fn parse_sequence_text(
    text: &str,
    alphabet: &SymbolAlphabet,
) -> Result<RunLengthSequence, RleError> {
    if text.contains('^') {
        return parse_run_length_text(text, alphabet);
    }
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    encode(&compact, alphabet)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHORTHAND_EXAMPLE: &str = "00011000000111110110010000011001000";

    fn bin() -> SymbolAlphabet {
        SymbolAlphabet::binary()
    }

    /// Per-position oracle on the expanded string.
    fn efrd_by_counting(s: &str) -> (Vec<f64>, usize) {
        let b: Vec<char> = s.chars().collect();
        let mut gaps = Vec::new();
        for t in 0..b.len().saturating_sub(1) {
            if b[t] == '1' {
                gaps.push(b[t + 1..].iter().take_while(|&&c| c == '0').count());
            }
        }
        let max = gaps.iter().copied().max().unwrap_or(0);
        let values = (0..=max)
            .map(|m| gaps.iter().filter(|&&g| g >= m).count() as f64 / gaps.len() as f64)
            .collect();
        (values, gaps.len())
    }

    #[test]
    fn encodes_shorthand_example() {
        let r = encode(SHORTHAND_EXAMPLE, &bin()).unwrap();
        assert_eq!(r.num_runs(), 13);
        assert_eq!(r.to_string(), "0^3 1^2 0^6 1^5 0^1 1^2 0^2 1^1 0^5 1^2 0^2 1^1 0^3");
        assert_eq!(r.total_length(), 35);
        assert_eq!(decode(&r), SHORTHAND_EXAMPLE);
    }

    #[test]
    fn single_runs() {
        assert_eq!(encode("0", &bin()).unwrap().runs(), &[Run { symbol: 0, count: 1 }]);
        assert_eq!(encode("111", &bin()).unwrap().runs(), &[Run { symbol: 1, count: 3 }]);
        let r = RunLengthSequence::new(bin(), vec![Run { symbol: 1, count: 1 }]).unwrap();
        assert_eq!(decode(&r), "1");
        let r = RunLengthSequence::new(
            bin(),
            vec![Run { symbol: 0, count: 3 }, Run { symbol: 1, count: 2 }],
        )
        .unwrap();
        assert_eq!(decode(&r), "00011");
    }

    #[test]
    fn unknown_symbol_reports_position() {
        assert_eq!(
            encode("0010x1", &bin()),
            Err(RleError::UnknownSymbol { position: 4, found: 'x' })
        );
        assert_eq!(encode("", &bin()), Err(RleError::Empty));
    }

    #[test]
    fn rejects_non_maximal_runs() {
        let err = RunLengthSequence::new(
            bin(),
            vec![Run { symbol: 0, count: 1 }, Run { symbol: 0, count: 2 }],
        )
        .unwrap_err();
        assert!(matches!(err, RleError::InvalidRun { index: 1, .. }));
    }

    #[test]
    fn error_probabilities() {
        let r = encode(SHORTHAND_EXAMPLE, &bin()).unwrap();
        let ones = SHORTHAND_EXAMPLE.chars().filter(|&c| c == '1').count();
        assert_eq!(ones, 13);
        assert_eq!(error_probability(&r).unwrap(), 13.0 / 35.0);
        assert_eq!(error_probability(&encode("0000", &bin()).unwrap()).unwrap(), 0.0);
        assert_eq!(error_probability(&encode("0101", &bin()).unwrap()).unwrap(), 0.5);
        let abc = SymbolAlphabet::new(vec!['a', 'b']).unwrap();
        assert_eq!(
            error_probability(&encode("ab", &abc).unwrap()),
            Err(RleError::NonBinaryAlphabet)
        );
    }

    #[test]
    fn efrd_small_cases() {
        let t = efrd(&encode("1010", &bin()).unwrap()).unwrap();
        assert_eq!(t.values, vec![1.0, 1.0]);
        assert_eq!(t.value(2), 0.0);
        assert_eq!(t.sample_count, 2);

        let t = efrd(&encode("1100", &bin()).unwrap()).unwrap();
        assert_eq!(t.values, vec![1.0, 0.5, 0.5]);
        assert_eq!(t.value(3), 0.0);
        assert_eq!(t.m_max, 2);
    }

    #[test]
    fn efrd_shorthand_example_matches_counting() {
        let r = encode(SHORTHAND_EXAMPLE, &bin()).unwrap();
        let t = efrd(&r).unwrap();
        let (oracle, n) = efrd_by_counting(SHORTHAND_EXAMPLE);
        assert_eq!(t.values, oracle);
        assert_eq!(t.sample_count, n);
        // sequence ends in zeros, so all 13 ones condition; 6 of them end a run of ones
        assert_eq!(n, 13);
        assert_eq!(t.value(1), 6.0 / 13.0);
    }

    #[test]
    fn efrd_final_error_excluded() {
        // last symbol is an error: it has no successor and is not counted
        let t = efrd(&encode("0110011", &bin()).unwrap()).unwrap();
        let (oracle, n) = efrd_by_counting("0110011");
        assert_eq!(n, 3);
        assert_eq!(t.values, oracle);
    }

    #[test]
    fn efrd_without_conditioning_events() {
        assert_eq!(efrd(&encode("0000", &bin()).unwrap()), Err(RleError::NoConditioningEvents));
        assert_eq!(efrd(&encode("0001", &bin()).unwrap()), Err(RleError::NoConditioningEvents));
    }

    #[test]
    fn parses_run_length_text_and_plain_text() {
        let a = parse_sequence_text("0^3 1^2\n0^1", &bin()).unwrap();
        assert_eq!(decode(&a), "000110");
        let b = parse_sequence_text("0001\n10\n", &bin()).unwrap();
        assert_eq!(a, b);
        let merged = parse_run_length_text("0^2 0^1 1^1", &bin()).unwrap();
        assert_eq!(merged.runs().len(), 2);
        assert!(parse_run_length_text("0^0", &bin()).is_err());
        assert!(parse_run_length_text("2^3", &bin()).is_err());
        assert!(parse_run_length_text("0-3", &bin()).is_err());
    }

    #[test]
    fn max_deviation_uses_zero_beyond_support() {
        let a = efrd(&encode("1100", &bin()).unwrap()).unwrap();
        let b = efrd(&encode("1010", &bin()).unwrap()).unwrap();
        assert_eq!(a.max_deviation(&b, None), 0.5);
        assert_eq!(a.max_deviation(&b, Some(0)), 0.0);
    }
}
