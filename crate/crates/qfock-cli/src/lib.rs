//! Batch front end for the quadratic Fock space library: reads a JSON job
//! spec, runs one computation or verification suite, and writes a
//! deterministic JSON or CSV artifact.

pub mod commands;
pub mod job;
pub mod output;
pub mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::job::{Effective, JobFile};
use crate::output::{Format, Outcome};

#[derive(Parser)]
#[command(name = "qfock", version, about = "Quadratic Fock space calculator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// n-particle inner products I_0..I_n, exact on rational inputs
    Inner(CommonArgs),
    /// Exponential vector inner product: truncated series against the
    /// closed form, with convergence diagnostics
    ExpInner(CommonArgs),
    /// Existence verdict for each function in the spec
    Exists(CommonArgs),
    /// Gram matrix of exponential vectors with PSD and independence
    /// verdicts
    Gram(CommonArgs),
    /// Seeded randomized property suite over the whole library
    Verify(CommonArgs),
    /// Sweep rho toward the existence boundary and trace partial sums
    ScanBoundary(CommonArgs),
}

#[derive(Args)]
pub struct CommonArgs {
    /// JSON job spec
    #[arg(long)]
    pub spec: PathBuf,
    /// Write the artifact to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Artifact format; default json, except scan-boundary which
    /// defaults to csv
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Series tolerance and relative eigenvalue tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Order for inner
    #[arg(long)]
    pub n: Option<u32>,
    /// Truncation budget for series evaluations
    #[arg(long = "n-max")]
    pub n_max: Option<u32>,
    /// RNG seed for the verify suite
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for Gram entries, suite cases, and rho sweeps
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn subcommand_parts(command: &Command) -> (&'static str, &CommonArgs) {
    match command {
        Command::Inner(a) => ("inner", a),
        Command::ExpInner(a) => ("exp-inner", a),
        Command::Exists(a) => ("exists", a),
        Command::Gram(a) => ("gram", a),
        Command::Verify(a) => ("verify", a),
        Command::ScanBoundary(a) => ("scan-boundary", a),
    }
}

fn default_format(name: &str) -> Format {
    if name == "scan-boundary" {
        Format::Csv
    } else {
        Format::Json
    }
}

/// Exit status classes: 2 rejects the input, 3 reports a domain or
/// convergence failure on well-formed input.
fn exit_for(e: &qfock::Error) -> i32 {
    match e.kind() {
        "DomainViolation" | "NoConvergenceWithinBudget" | "OracleBudgetExceeded"
        | "NotHermitian" => 3,
        _ => 2,
    }
}

fn execute(name: &'static str, args: &CommonArgs) -> qfock::Result<i32> {
    let file = JobFile::load(&args.spec)?;
    file.check_command(name)?;
    let eff = Effective::resolve(&file, args.tol, args.n, args.n_max, args.seed, args.jobs)?;
    let outcome: Outcome = match name {
        "inner" => commands::inner(&file, &eff)?,
        "exp-inner" => commands::exp_inner(&file, &eff)?,
        "exists" => commands::exists(&file)?,
        "gram" => commands::gram(&file, &eff)?,
        "verify" => commands::run_verify(&file, &eff)?,
        "scan-boundary" => commands::scan_boundary(&file, &eff)?,
        _ => unreachable!("subcommand names are fixed"),
    };
    let text = outcome.render(args.format.unwrap_or(default_format(name)))?;
    output::write_artifact(&text, args.out.as_deref())?;
    Ok(outcome.exit)
}

pub fn run(cli: &Cli) -> i32 {
    let (name, args) = subcommand_parts(&cli.command);
    match execute(name, args) {
        Ok(code) => code,
        Err(e) => {
            let body = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            let _ = output::write_artifact(&format!("{body:#}\n"), None);
            exit_for(&e)
        }
    }
}
