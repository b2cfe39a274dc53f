//! `shmm`: simulate, fit, convert, and validate burst-error channel models.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "shmm", version, about = "Block-diagonal semi-hidden Markov models for bursty error channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a symbol sequence from a model.
    Simulate(SimulateArgs),
    /// Fit a block-diagonal model to a sequence with run-length Baum-Welch.
    Fit(FitArgs),
    /// Check admissibility of a general model and build its block-diagonal equivalent.
    Equiv(EquivArgs),
    /// Compare two models' likelihoods over every sequence up to a length.
    Verify(VerifyArgs),
    /// Compare a sequence with one regenerated from a model.
    Validate(ValidateArgs),
    /// Simulate, fit, and validate all six bundled channel cells.
    Demo(DemoArgs),
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Number of symbols (at least 1).
    #[arg(long, default_value_t = 20_000)]
    pub len: u64,
    #[arg(long)]
    pub seed: u64,
    /// Sequence file to write; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct FitOptions {
    /// Relative log-likelihood change that stops the iteration.
    #[arg(long, default_value_t = 1e-6, value_parser = positive_f64)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Re-estimate the initial distribution as the stationary vector instead of γ₁.
    #[arg(long)]
    pub stationary_pi: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Initial block-diagonal model.
    #[arg(long)]
    pub init: PathBuf,
    /// Sequence file (plain symbols or `sym^count` tokens).
    #[arg(long)]
    pub seq: PathBuf,
    /// Fitted model file; the report goes to `<out>.report.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub options: FitOptions,
    /// Also run symbol-by-symbol Baum-Welch and print the largest discrepancy.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct EquivArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Λ model file; conditions go to `<out>.conditions.json`, W to `<out>.transform.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Give exactly two models.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub seq: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Seed of the regenerated sequence.
    #[arg(long)]
    pub seed: u64,
    /// Output directory for the EFRD tables and `validation.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 20_000)]
    pub len: u64,
    #[command(flatten)]
    pub options: FitOptions,
    #[arg(long)]
    pub out: PathBuf,
}

/// Rejects a zero `--len` with the subcommand's usage line.
fn check_length(cli: &Cli) -> Result<(), ExitCode> {
    let (name, len) = match &cli.command {
        Command::Simulate(a) => ("simulate", a.len),
        Command::Demo(a) => ("demo", a.len),
        _ => return Ok(()),
    };
    if len > 0 {
        return Ok(());
    }
    let mut cmd = Cli::command();
    cmd.build();
    let usage = cmd.find_subcommand_mut(name).map(|c| c.render_usage().to_string()).unwrap_or_default();
    eprintln!("error: --len must be at least 1\n\n{usage}");
    Err(ExitCode::from(2))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(code) = check_length(&cli) {
        return code;
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Equiv(a) => commands::equiv(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::Demo(a) => commands::demo(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
