//! On-disk formats: JSON model files, fit and condition reports, CSV tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equivalence::ConditionReport;
use crate::inference::{CostCounters, FitReport, StopReason};
use crate::model::{ModelError, ModelKind, PartitionedModel, StatePartition, SymbolAlphabet};
use crate::rle::EfrdTable;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("alphabet entry {0:?} is not a single character")]
    Symbol(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Serialized form of a [`PartitionedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub alphabet: Vec<String>,
    pub kind: ModelKind,
    /// States per symbol, in alphabet order.
    pub partition: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<Vec<f64>>,
    /// Row-major.
    pub transition: Vec<Vec<f64>>,
    pub version: u32,
}

impl From<&PartitionedModel> for ModelFile {
    fn from(model: &PartitionedModel) -> Self {
        let t = model.transition();
        Self {
            alphabet: model.alphabet().symbols().iter().map(|c| c.to_string()).collect(),
            kind: model.kind(),
            partition: model.partition().counts().to_vec(),
            stationary: Some(model.stationary().to_vec()),
            transition: (0..t.nrows()).map(|i| t.row(i).iter().copied().collect()).collect(),
            version: FORMAT_VERSION,
        }
    }
}

impl ModelFile {
    /// Validating conversion.
    pub fn into_model(self) -> Result<PartitionedModel, FormatError> {
        if self.version != FORMAT_VERSION {
            return Err(FormatError::Version(self.version));
        }
        let symbols = self
            .alphabet
            .iter()
            .map(|s| {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(FormatError::Symbol(s.clone())),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let alphabet = SymbolAlphabet::new(symbols)?;
        let partition = StatePartition::new(self.partition)?;
        let rows: Vec<&[f64]> = self.transition.iter().map(Vec::as_slice).collect();
        let transition = crate::model::matrix_from_rows(&rows)?;
        Ok(PartitionedModel::new(alphabet, partition, transition, self.stationary, self.kind)?)
    }
}

pub fn model_to_json(model: &PartitionedModel) -> String {
    to_pretty(&ModelFile::from(model))
}

pub fn model_from_json(text: &str) -> Result<PartitionedModel, FormatError> {
    serde_json::from_str::<ModelFile>(text)?.into_model()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountersFile {
    pub diagonal_powers: u64,
    pub inter_block_products: u64,
}

impl From<CostCounters> for CountersFile {
    fn from(c: CostCounters) -> Self {
        Self { diagonal_powers: c.diagonal_powers, inter_block_products: c.inter_block_products }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReportFile {
    pub converged: bool,
    /// Totals over all forward passes.
    pub counters: CountersFile,
    pub final_model: ModelFile,
    pub forward_passes: usize,
    pub initial_distribution: Vec<f64>,
    pub initial_model: ModelFile,
    pub iterations: usize,
    pub num_runs: usize,
    pub per_pass_counters: CountersFile,
    pub stop_reason: StopReason,
    pub tolerance: f64,
    pub trace: Vec<f64>,
    pub version: u32,
}

pub fn fit_report_to_json(report: &FitReport, num_runs: usize, tolerance: f64) -> String {
    let per_pass = report.pass_counters.first().copied().unwrap_or_default();
    to_pretty(&FitReportFile {
        converged: report.converged,
        counters: report.counters.into(),
        final_model: (&report.final_model).into(),
        forward_passes: report.pass_counters.len(),
        initial_distribution: report.initial_distribution.clone(),
        initial_model: (&report.initial_model).into(),
        iterations: report.iterations,
        num_runs,
        per_pass_counters: per_pass.into(),
        stop_reason: report.stop_reason,
        tolerance,
        trace: report.loglik_trace.clone(),
        version: FORMAT_VERSION,
    })
}

#[derive(Serialize)]
struct ConditionReportFile<'a> {
    entries: &'a [crate::equivalence::ConditionEntry],
    passed: bool,
    version: u32,
}

pub fn condition_report_to_json(report: &ConditionReport) -> String {
    to_pretty(&ConditionReportFile { entries: &report.entries, passed: report.passed(), version: FORMAT_VERSION })
}

/// Metadata written next to a simulated sequence.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationMeta {
    pub error_probability: Option<f64>,
    pub length: usize,
    pub model: String,
    pub num_runs: usize,
    pub rng: String,
    pub seed: u64,
    pub version: u32,
}

pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// EFRD table as CSV with `m,pr_efr,samples`, where `samples` is the number
/// of conditioning errors followed by at least `m` error-free symbols.
pub fn efrd_to_csv(table: &EfrdTable, source: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# version: {FORMAT_VERSION}");
    let _ = writeln!(out, "# source: {source}");
    let _ = writeln!(
        out,
        "# pr_efr(m) = fraction of errors (excluding one at the final position) followed by at least m error-free symbols"
    );
    let _ = writeln!(out, "# conditioning_errors: {}", table.sample_count);
    out.push_str("m,pr_efr,samples\n");
    for m in 0..=table.m_max {
        let _ = writeln!(out, "{m},{},{}", table.value(m), table.exceed_counts[m]);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: String,
    pub pe_measured: f64,
    pub pe_model: f64,
    pub efrd_max_dev: f64,
    pub iterations: usize,
    pub loglik: f64,
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("# version: {FORMAT_VERSION}\ncell,pe_measured,pe_model,efrd_max_dev,iterations,loglik\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{},{:.6}",
            r.cell, r.pe_measured, r.pe_model, r.efrd_max_dev, r.iterations, r.loglik
        );
    }
    out
}
