mod commands;
mod failure;
mod manifest;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use igl_core::eval::Method;

use crate::failure::{ExitKind, Failure};

/// Physics-informed graph learning for district-heating sensor data.
///
/// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
/// 3 numerical failure. Every run writes a JSON manifest next to its outputs;
/// outputs are written only when the whole run succeeds.
#[derive(Debug, Parser)]
#[command(name = "igl", version, about, long_about)]
struct Cli {
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic sensor dataset (train_clean.csv, train_noisy.csv,
    /// test.csv, norm_stats.csv, labels.csv, topology.toml, manifest.json and
    /// optionally test_mask.csv).
    Generate(GenerateArgs),
    /// Build or learn a graph and write its adjacency matrix as CSV.
    Learn(LearnArgs),
    /// Denoise signals with a graph: X = (I + mu L)^-1 Y.
    Denoise(DenoiseArgs),
    /// Fill unobserved entries by smooth interpolation over a graph.
    Impute(ImputeArgs),
    /// Score an estimate against a reference (RMSE and MAE).
    Evaluate(EvaluateArgs),
    /// Run the full method comparison: cross-validation, denoising and
    /// imputation scenarios, results table, JSON records and heatmap.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generation config (TOML). Defaults to the bundled configuration and network.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// RNG seed; overrides the config's seed (default 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write test_mask.csv: a random 0/1 mask over the test block that
    /// observes each entry with this probability, in (0, 1].
    #[arg(long)]
    pub mask_rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Graph construction method: physics, lap-smooth, adj-smooth or igl.
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Training signals CSV (one row per node). Not needed for `physics`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Network topology (TOML). Required for `physics` and `igl`; also supplies node ids.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Parameters file (TOML). Defaults: alpha 1, beta 0.4, upsilon 0.4,
    /// eps0 1e-5, k_max 20000, beta1 0.4, distance_scaling mean, prior_threshold 0.1.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output adjacency CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-iteration solver trace CSV (igl and adj-smooth).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Adjacency CSV written by `learn`.
    #[arg(long)]
    pub graph: PathBuf,
    /// Noisy signals CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Parameters file (TOML); uses [reconstruct] mu (default 1.0).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Overrides the params file's mu.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Output signals CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    /// Adjacency CSV written by `learn`.
    #[arg(long)]
    pub graph: PathBuf,
    /// Signals CSV; values at unobserved entries are ignored.
    #[arg(long)]
    pub data: PathBuf,
    /// 0/1 CSV of the same shape as the data (1 = observed).
    #[arg(long)]
    pub mask: PathBuf,
    /// Parameters file (TOML); uses [reconstruct] tol (default 1e-8) and max_iters (default 20000).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output signals CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimated signals CSV.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Reference signals CSV.
    #[arg(long)]
    pub reference: PathBuf,
    /// Dataset directory; when given, both matrices are mapped back to sensor
    /// units with its norm_stats.csv and labels.csv before scoring.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Observation mask CSV; with --missing-only, only unobserved entries are scored.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Score only entries where the mask is 0.
    #[arg(long, requires = "mask")]
    pub missing_only: bool,
    /// Output JSON with the metrics.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Experiment spec (TOML). Defaults to every method, sigma 0.3,
    /// rhos 0.3/0.5/0.7/0.9, 5 folds and the default grid on generated data.
    #[arg(long)]
    pub experiment: Option<PathBuf>,
    /// Output directory; overrides the spec's output_dir (default "results").
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the spec's seed (default 2024).
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: igl_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitKind::Usage as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Learn(a) => commands::learn(&a),
        Command::Denoise(a) => commands::denoise(&a),
        Command::Impute(a) => commands::impute(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Compare(a) => commands::compare(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { kind, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(kind as u8)
        }
    }
}
