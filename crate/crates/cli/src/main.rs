//! `dyadic`: batch verification of weighted dyadic operator bounds.
//!
//! Exit status: 0 when every checked inequality held, 1 when any failed,
//! 2 for usage, configuration or input errors.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dyadic_core::experiments::{
    sharpness, sparse_decompose, verify_cz, verify_frac, verify_maximal, ExperimentConfig, OutputFormat,
};
use dyadic_core::step::StepFunction;

#[derive(Parser)]
#[command(name = "dyadic", version, about = "Weighted bounds for sparse and maximal dyadic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Strong and weak type bounds for the universal maximal operator.
    VerifyMaximal(Flags),
    /// Weighted bound for sparse operators on random families and weights.
    VerifyCz(Flags),
    /// Off-diagonal weighted bound for sparse fractional operators.
    VerifyFrac(Flags),
    /// Growth exponent of the sparse norm along power weights.
    Sharpness(Flags),
    /// Stopping cubes of a step function read from --input.
    SparseDecompose(Flags),
}

#[derive(Args, Clone, Debug, Default)]
struct Flags {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Root cube is [0, 2^K)^n.
    #[arg(long, allow_hyphen_values = true)]
    root_level: Option<i32>,
    /// Cells have side 2^L.
    #[arg(long, allow_hyphen_values = true)]
    resolution_level: Option<i32>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated list for `sharpness`.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Tower depth for `sharpness`.
    #[arg(long)]
    depth: Option<usize>,
    /// Starts per norm estimate.
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// JSON file with any of the above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        _ => Err(format!("unknown format {s:?}, expected json or csv")),
    }
}

impl Flags {
    fn into_config(self) -> Result<ExperimentConfig, String> {
        let base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?
            }
            None => ExperimentConfig::default(),
        };
        Ok(base.overlay(ExperimentConfig {
            p: self.p,
            q: self.q,
            alpha: self.alpha,
            n: self.n,
            root_level: self.root_level,
            resolution_level: self.resolution_level,
            trials: self.trials,
            seed: self.seed,
            deltas: self.deltas,
            depth: self.depth,
            restarts: self.restarts,
            out: self.out,
            format: self.format,
            input: self.input,
        }))
    }
}

/// Report JSON, or CSV of its rows.
fn emit<R: Serialize, T: Serialize>(cfg: &ExperimentConfig, report: &R, rows: &[T]) -> Result<(), String> {
    let bytes = match cfg.format.unwrap_or_default() {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
            s.push('\n');
            s.into_bytes()
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| e.to_string())?;
            }
            w.into_inner().map_err(|e| e.to_string())?
        }
    };
    match &cfg.out {
        Some(path) => fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display())),
        None => io::stdout().write_all(&bytes).map_err(|e| e.to_string()),
    }
}

#[derive(Serialize)]
struct CubeRow {
    level: i32,
    index: String,
}

fn run(command: Command) -> Result<bool, String> {
    let (flags, name) = match &command {
        Command::VerifyMaximal(f) => (f.clone(), "verify-maximal"),
        Command::VerifyCz(f) => (f.clone(), "verify-cz"),
        Command::VerifyFrac(f) => (f.clone(), "verify-frac"),
        Command::Sharpness(f) => (f.clone(), "sharpness"),
        Command::SparseDecompose(f) => (f.clone(), "sparse-decompose"),
    };
    let cfg = flags.into_config()?;
    let err = |e: dyadic_core::Error| e.to_string();
    match command {
        Command::VerifyMaximal(_) => {
            let r = verify_maximal(&cfg).map_err(err)?;
            emit(&cfg, &r, &r.rows)?;
            eprintln!(
                "{name}: {} trials, {} strong and {} weak violations, max ratio/bound {:.6}",
                r.trials, r.strong_violations, r.weak_violations, r.max_ratio_over_bound
            );
            Ok(r.ok)
        }
        Command::VerifyCz(_) | Command::VerifyFrac(_) => {
            let r = if name == "verify-cz" { verify_cz(&cfg) } else { verify_frac(&cfg) }.map_err(err)?;
            emit(&cfg, &r, &r.rows)?;
            let exponent = r.exponent.map_or("per trial".to_string(), |b| format!("{b}"));
            eprintln!(
                "{name}: {}/{} ok, worst norm/bound {:.6}, exponent {exponent}, {} of {} chains monotone",
                r.ok_count,
                r.trials,
                r.worst_ratio,
                r.chains_checked - r.chain_failures,
                r.chains_checked
            );
            Ok(r.ok)
        }
        Command::Sharpness(_) => {
            let r = sharpness(&cfg).map_err(err)?;
            emit(&cfg, &r, &r.rows)?;
            match r.slope {
                Some(s) => eprintln!("{name}: slope {s:.4}, target exponent {}", r.target_exponent),
                None => eprintln!("{name}: single delta, no slope"),
            }
            Ok(true)
        }
        Command::SparseDecompose(_) => {
            let input = cfg.input.as_ref().ok_or("sparse-decompose needs --input")?;
            let f = StepFunction::load(input).map_err(|e| format!("{}: {e}", input.display()))?;
            let r = sparse_decompose(&f, cfg.alpha.unwrap_or(0.5)).map_err(err)?;
            let rows: Vec<CubeRow> = r
                .family
                .cubes()
                .iter()
                .map(|c| CubeRow {
                    level: c.level,
                    index: c.index.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";"),
                })
                .collect();
            emit(&cfg, &r, &rows)?;
            eprintln!(
                "{name}: {} cubes, sparse {}, max I^D/I^S {:.6}",
                r.cubes, r.is_sparse, r.max_dyadic_over_sparse
            );
            Ok(r.ok())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
