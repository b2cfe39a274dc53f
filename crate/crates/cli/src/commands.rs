use std::path::PathBuf;
use std::process::ExitCode;

use serde::Serialize;
use shmm_core::equivalence::{check_conditions, construct_equivalent, verify_equivalence, TransformW};
use shmm_core::fixtures::{Cell, CELLS};
use shmm_core::format::{
    condition_report_to_json, efrd_to_csv, fit_report_to_json, model_to_json, summary_to_csv, to_pretty,
    SimulationMeta, SummaryRow, FORMAT_VERSION,
};
use shmm_core::inference::{conventional_fit, fit as run_fit, FitConfig, FitReport, PriorUpdate};
use shmm_core::model::PartitionedModel;
use shmm_core::rle::{encode, error_probability, RunLengthSequence};
use shmm_core::simulate::{simulate as run_simulate, RNG_ALGORITHM};
use shmm_core::validation::{validate_against, ValidationReport};

use crate::error::CliError;
use crate::io::{read_model, read_sequence, sidecar, write_all_atomic};
use crate::{DemoArgs, EquivArgs, FitArgs, FitOptions, SimulateArgs, ValidateArgs, VerifyArgs};

/// EFRD comparison window used in the summary alongside the full-support deviation.
const EFRD_WINDOW: usize = 30;

const NOT_CONVERGED: u8 = 4;

fn fit_config(o: &FitOptions) -> FitConfig {
    FitConfig {
        tol: o.tol,
        max_iter: o.max_iter,
        prior_update: if o.stationary_pi { PriorUpdate::Stationary } else { PriorUpdate::FirstPosterior },
    }
}

fn sequence_text(symbols: &str) -> String {
    let mut s = String::with_capacity(symbols.len() + 1);
    s.push_str(symbols);
    s.push('\n');
    s
}

fn length(len: u64) -> Result<usize, CliError> {
    usize::try_from(len).map_err(|_| CliError::Invalid(format!("length {len} does not fit in memory")))
}

pub fn simulate(a: &SimulateArgs) -> Result<ExitCode, CliError> {
    let model = read_model(&a.model)?;
    let len = length(a.len)?;
    let symbols = run_simulate(&model, len, a.seed)?;
    let runs = encode(&symbols, model.alphabet())?;
    let pe = error_probability(&runs).ok();
    let meta = SimulationMeta {
        error_probability: pe,
        length: len,
        model: a.model.display().to_string(),
        num_runs: runs.num_runs(),
        rng: RNG_ALGORITHM.to_string(),
        seed: a.seed,
        version: FORMAT_VERSION,
    };
    write_all_atomic(&[
        (a.out.clone(), sequence_text(&symbols)),
        (sidecar(&a.out, "meta.json"), to_pretty(&meta)),
    ])?;
    if let Some(pe) = pe {
        println!("error probability: {pe:.6}");
    }
    println!("runs: {}", runs.num_runs());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct OracleComparison {
    conventional_iterations: usize,
    iterations: usize,
    max_loglik_discrepancy: f64,
    max_transition_discrepancy: f64,
    version: u32,
}

fn oracle(
    init: &PartitionedModel,
    runs: &RunLengthSequence,
    config: &FitConfig,
    report: &FitReport,
) -> Result<OracleComparison, CliError> {
    let conv = conventional_fit(init, &runs.symbols(), config)?;
    let trace = report
        .loglik_trace
        .iter()
        .zip(&conv.trace)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let matrix = (report.final_model.transition() - &conv.transition).abs().max();
    Ok(OracleComparison {
        conventional_iterations: conv.iterations,
        iterations: report.iterations,
        max_loglik_discrepancy: trace,
        max_transition_discrepancy: matrix,
        version: FORMAT_VERSION,
    })
}

pub fn fit(a: &FitArgs) -> Result<ExitCode, CliError> {
    let init = read_model(&a.init)?;
    let runs = read_sequence(&a.seq, init.alphabet())?;
    let config = fit_config(&a.options);
    let report = run_fit(&init, &runs, &config)?;

    let mut files = vec![
        (a.out.clone(), model_to_json(&report.final_model)),
        (sidecar(&a.out, "report.json"), fit_report_to_json(&report, runs.num_runs(), config.tol)),
    ];
    let comparison = if a.oracle { Some(oracle(&init, &runs, &config, &report)?) } else { None };
    if let Some(c) = &comparison {
        files.push((sidecar(&a.out, "oracle.json"), to_pretty(c)));
    }
    write_all_atomic(&files)?;

    println!("iterations: {}", report.iterations);
    println!("log-likelihood: {:.10}", report.final_log_likelihood());
    println!("stop: {}", report.stop_reason);
    if let Some(c) = comparison {
        println!(
            "oracle: conventional iterations {}, max log-likelihood discrepancy {:.3e}, max transition discrepancy {:.3e}",
            c.conventional_iterations, c.max_loglik_discrepancy, c.max_transition_discrepancy
        );
    }
    if report.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: no convergence within {} iterations; report written", config.max_iter);
        Ok(ExitCode::from(NOT_CONVERGED))
    }
}

#[derive(Serialize)]
struct TransformFile<'a> {
    blocks: Vec<Vec<Vec<f64>>>,
    condition_numbers: &'a [f64],
    eigenvalues: &'a [Vec<f64>],
    version: u32,
}

fn transform_json(w: &TransformW) -> String {
    let blocks = w
        .blocks
        .iter()
        .map(|b| (0..b.nrows()).map(|i| b.row(i).iter().copied().collect()).collect())
        .collect();
    to_pretty(&TransformFile {
        blocks,
        condition_numbers: &w.condition_numbers,
        eigenvalues: &w.eigenvalues,
        version: FORMAT_VERSION,
    })
}

pub fn equiv(a: &EquivArgs) -> Result<ExitCode, CliError> {
    let model = read_model(&a.model)?;
    let report = check_conditions(&model)?;
    let report_path = sidecar(&a.out, "conditions.json");
    if !report.passed() {
        write_all_atomic(&[(report_path, condition_report_to_json(&report))])?;
        return Err(CliError::ConditionViolation(Box::new(report)));
    }
    let (lambda, w) = construct_equivalent(&model)?;
    write_all_atomic(&[
        (a.out.clone(), model_to_json(&lambda)),
        (report_path, condition_report_to_json(&report)),
        (sidecar(&a.out, "transform.json"), transform_json(&w)),
    ])?;
    print!("{report}");
    for (k, ev) in w.eigenvalues.iter().enumerate() {
        println!("symbol {:?} eigenvalues: {ev:?}", model.alphabet().symbol(k));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify(a: &VerifyArgs) -> Result<ExitCode, CliError> {
    let [first, second] = a.models.as_slice() else {
        return Err(CliError::Invalid(format!("verify needs exactly two --model flags, got {}", a.models.len())));
    };
    let m1 = read_model(first)?;
    let m2 = read_model(second)?;
    let discrepancy = verify_equivalence(&m1, &m2, a.max_len)?;
    println!("max relative discrepancy (length ≤ {}): {discrepancy:.3e}", a.max_len);
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ValidationFile {
    efrd_max_dev: f64,
    efrd_max_dev_window: f64,
    efrd_window: usize,
    length: usize,
    m_max_measured: usize,
    m_max_model: usize,
    pe_difference: f64,
    pe_measured: f64,
    pe_model: f64,
    rng: &'static str,
    seed: u64,
    version: u32,
}

fn validation_file(v: &ValidationReport, seed: u64) -> ValidationFile {
    ValidationFile {
        efrd_max_dev: v.efrd_max_deviation(None),
        efrd_max_dev_window: v.efrd_max_deviation(Some(EFRD_WINDOW)),
        efrd_window: EFRD_WINDOW,
        length: v.regenerated.total_length(),
        m_max_measured: v.efrd_measured.m_max,
        m_max_model: v.efrd_model.m_max,
        pe_difference: v.pe_difference(),
        pe_measured: v.pe_measured,
        pe_model: v.pe_model,
        rng: RNG_ALGORITHM,
        seed,
        version: FORMAT_VERSION,
    }
}

pub fn validate(a: &ValidateArgs) -> Result<ExitCode, CliError> {
    let model = read_model(&a.model)?;
    let runs = read_sequence(&a.seq, model.alphabet())?;
    let v = validate_against(&runs, &model, a.seed)?;
    let summary = validation_file(&v, a.seed);
    write_all_atomic(&[
        (a.out.join("efrd_measured.csv"), efrd_to_csv(&v.efrd_measured, &a.seq.display().to_string())),
        (a.out.join("efrd_model.csv"), efrd_to_csv(&v.efrd_model, &format!("regenerated, seed {}", a.seed))),
        (a.out.join("validation.json"), to_pretty(&summary)),
    ])?;
    println!("P_e (measured): {:.4}", v.pe_measured);
    println!("P_e (model):    {:.4}", v.pe_model);
    println!("difference:     {:+.4}", v.pe_difference());
    println!("max EFRD deviation: {:.4} (m ≤ {EFRD_WINDOW}: {:.4})", summary.efrd_max_dev, summary.efrd_max_dev_window);
    Ok(ExitCode::SUCCESS)
}

struct CellOutcome {
    files: Vec<(PathBuf, String)>,
    row: SummaryRow,
    converged: bool,
}

fn run_cell(cell: &Cell, index: u64, a: &DemoArgs) -> Result<CellOutcome, CliError> {
    let truth = cell.converged_model()?;
    let init = cell.initial_model()?;
    let len = length(a.len)?;
    let sim_seed = a.seed.wrapping_add(2 * index);
    let check_seed = sim_seed.wrapping_add(1);
    let symbols = run_simulate(&truth, len, sim_seed)?;
    let runs = encode(&symbols, truth.alphabet())?;
    let config = fit_config(&a.options);
    let report = run_fit(&init, &runs, &config).map_err(|e| CliError::from(e).in_cell(cell.name))?;
    let v = validate_against(&runs, &report.final_model, check_seed)
        .map_err(|e| CliError::from(e).in_cell(cell.name))?;

    let dir = &a.out;
    let name = cell.name;
    let files = vec![
        (dir.join(format!("{name}.seq")), sequence_text(&symbols)),
        (dir.join(format!("{name}.model.json")), model_to_json(&report.final_model)),
        (dir.join(format!("{name}.report.json")), fit_report_to_json(&report, runs.num_runs(), config.tol)),
        (dir.join(format!("{name}.efrd_measured.csv")), efrd_to_csv(&v.efrd_measured, &format!("{name}, seed {sim_seed}"))),
        (dir.join(format!("{name}.efrd_model.csv")), efrd_to_csv(&v.efrd_model, &format!("{name} fit, seed {check_seed}"))),
    ];
    Ok(CellOutcome {
        files,
        row: SummaryRow {
            cell: name.to_string(),
            pe_measured: v.pe_measured,
            pe_model: v.pe_model,
            efrd_max_dev: v.efrd_max_deviation(Some(EFRD_WINDOW)),
            iterations: report.iterations,
            loglik: report.final_log_likelihood(),
        },
        converged: report.converged,
    })
}

impl CliError {
    fn in_cell(self, cell: &str) -> Self {
        match self {
            CliError::Invalid(msg) => CliError::Invalid(format!("{cell}: {msg}")),
            other => other,
        }
    }
}

pub fn demo(a: &DemoArgs) -> Result<ExitCode, CliError> {
    let outcomes: Vec<Result<CellOutcome, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = CELLS
            .iter()
            .enumerate()
            .map(|(i, cell)| scope.spawn(move || run_cell(cell, i as u64, a)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("cell worker panicked")).collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;

    let rows: Vec<SummaryRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    let mut files: Vec<(PathBuf, String)> = outcomes.iter().flat_map(|o| o.files.clone()).collect();
    files.push((a.out.join("summary.csv"), summary_to_csv(&rows)));
    write_all_atomic(&files)?;

    println!("{:<14} {:>10} {:>10} {:>12} {:>6}", "cell", "P_e", "P̄_e", "EFRD dev", "iter");
    for r in &rows {
        println!(
            "{:<14} {:>10.4} {:>10.4} {:>12.4} {:>6}",
            r.cell, r.pe_measured, r.pe_model, r.efrd_max_dev, r.iterations
        );
    }
    if outcomes.iter().all(|o| o.converged) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: some cells stopped at the iteration limit");
        Ok(ExitCode::from(NOT_CONVERGED))
    }
}
