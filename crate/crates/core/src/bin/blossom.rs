//! Command-line experiment runner.
//!
//! ```text
//! blossom run --objective branin --algorithm blossom --stop 1e-2 --seeds 0,1,2 --max-iter 200 --out results/
//! blossom summarize --in results/ --out results/summary.csv
//! ```
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 when every run failed.

use std::path::PathBuf;
use std::process::ExitCode;

use blossom::controller::TerminationReason;
use blossom::harness::config::{self, Algorithm, Settings};
use blossom::harness::{self, summary};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "blossom",
    version,
    about = "Bayesian optimization with regret-based stopping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment over several seeds.
    Run {
        /// Benchmark name (branin, camel3, camel6, hartmann3, hartmann4, hartmann6) or gp-draw.
        #[arg(long)]
        objective: Option<String>,
        /// blossom, ei-pi or bayes-aqstop.
        #[arg(long)]
        algorithm: Option<String>,
        /// Regret target (blossom) or stopping threshold (baselines).
        #[arg(long)]
        stop: Option<f64>,
        /// Comma-separated seeds.
        #[arg(long)]
        seeds: Option<String>,
        /// Evaluation budget per run.
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        /// Output directory for traces and metadata.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dimension of gp-draw objectives.
        #[arg(long)]
        dim: Option<usize>,
        /// JSON file with any of the above plus optimizer settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summarize the runs found in a directory.
    Summarize {
        /// Directory written by `run`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Summary CSV; a survival CSV and a text table are written next to it.
        #[arg(long)]
        out: PathBuf,
    },
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run {
            objective,
            algorithm,
            stop,
            seeds,
            max_iter,
            out,
            dim,
            config: config_path,
        } => {
            let algorithm = match algorithm.as_deref().map(Algorithm::parse).transpose() {
                Ok(a) => a,
                Err(e) => return config_error(e),
            };
            let seeds = match seeds.as_deref().map(config::parse_seeds).transpose() {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            let cli_settings = Settings {
                objective,
                algorithm,
                stop,
                seeds,
                max_iter,
                out,
                dim,
            };
            let file = match config_path.as_deref().map(config::load_config).transpose() {
                Ok(f) => f,
                Err(e) => return config_error(e),
            };
            let cfg = match config::resolve(cli_settings, file) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let records = match harness::run_experiment(&cfg) {
                Ok(r) => r,
                Err(e @ blossom::Error::Io(_)) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
                Err(e) => return config_error(e),
            };
            for r in &records {
                println!(
                    "{} {} seed {}: {} after {} evaluations, regret {:e}",
                    r.objective,
                    summary::method_label(&r.algorithm, r.stop_param),
                    r.seed,
                    r.terminated_reason.as_str(),
                    r.total_evals,
                    r.regret
                );
                if let Some(err) = &r.error {
                    eprintln!("  error: {err}");
                }
            }
            if records
                .iter()
                .all(|r| r.terminated_reason == TerminationReason::Error)
            {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Summarize { input, out } => {
            let summary = match summary::summarize(&input) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            if let Err(e) = summary::write_summary(&out, &summary) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            print!("{}", summary::render_table(&summary.rows));
            ExitCode::SUCCESS
        }
    }
}
