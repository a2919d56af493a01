//! Experiment runner: executes the optimizer or a baseline stopping rule over
//! seeded repetitions and records one trace file plus one metadata record per
//! run.

pub mod config;
pub mod summary;
pub mod trace;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{
    run_with_hook, BayesAcquisition, IterationView, RunResult, StepRecord, StopHook, Strategy,
    TerminationReason,
};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::objectives::{draw_gp_objective, log_transform, make_benchmark, Benchmark};
use crate::rng;
use crate::stats::norm_cdf;

pub use config::{Algorithm, ExperimentConfig, Settings};
pub use summary::{summarize, Summary, SummaryRow, SurvivalTable};

/// Name of the synthetic objective family drawn from a Matérn 5/2 process.
pub const GP_DRAW: &str = "gp-draw";
/// Lengthscale of GP-draw objectives on their `[-1, 1]^d` domain.
pub const GP_DRAW_LENGTHSCALE: f64 = 0.3;
/// Dimension of GP-draw objectives when none is given.
pub const GP_DRAW_DEFAULT_DIM: usize = 2;

/// Metadata written next to each trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub objective: String,
    pub algorithm: String,
    pub stop_param: f64,
    pub seed: u64,
    pub terminated_reason: TerminationReason,
    pub total_evals: usize,
    pub bayes_iterations: usize,
    pub recommendation: Vec<f64>,
    #[serde(with = "nonfinite")]
    pub recommended_y: f64,
    /// Objective minimum used for the regret: 0 for the log-transformed
    /// benchmarks, the path minimum for GP draws.
    #[serde(with = "nonfinite")]
    pub known_minimum: f64,
    #[serde(with = "nonfinite")]
    pub regret: f64,
    /// Last value of the baseline's stopping statistic, if any.
    pub stop_statistic: Option<f64>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

/// JSON has no infinities or NaNs; those are written as strings.
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Objective prepared for an experiment.
pub enum Objective {
    /// A benchmark, log-transformed so its minimum is 0.
    Benchmark(Benchmark),
    /// One Matérn 5/2 sample path per seed.
    GpDraw { dim: usize },
}

impl Objective {
    pub fn new(name: &str, dim: Option<usize>) -> Result<Self> {
        if name.eq_ignore_ascii_case(GP_DRAW) {
            return Ok(Objective::GpDraw {
                dim: dim.unwrap_or(GP_DRAW_DEFAULT_DIM),
            });
        }
        let bench = match make_benchmark(name) {
            Ok(b) => log_transform(&b)?,
            Err(Error::UnknownObjective { name, supported }) => {
                return Err(Error::UnknownObjective {
                    name,
                    supported: format!("{supported}, {GP_DRAW}"),
                })
            }
            Err(e) => return Err(e),
        };
        if let Some(d) = dim.filter(|&d| d != bench.dimension) {
            return Err(Error::InvalidArgument(format!(
                "{} has dimension {}, not {d}",
                bench.name, bench.dimension
            )));
        }
        Ok(Objective::Benchmark(bench))
    }

    pub fn name(&self) -> String {
        match self {
            Objective::Benchmark(b) => b.name.clone(),
            Objective::GpDraw { dim } => format!("{GP_DRAW}-{dim}d"),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Objective::Benchmark(b) => b.dimension,
            Objective::GpDraw { dim } => *dim,
        }
    }
}

/// Stopping statistic of a baseline at the proposed point.
fn stop_statistic(algorithm: Algorithm, view: &IterationView) -> Option<f64> {
    match algorithm {
        Algorithm::Blossom => None,
        Algorithm::EiWithPiStop => {
            let (mean, var) = view.model.predict(&view.proposal.x);
            let sd = var.max(0.0).sqrt();
            Some(if sd > 0.0 {
                norm_cdf((view.incumbent_y - mean) / sd)
            } else if mean < view.incumbent_y {
                1.0
            } else {
                0.0
            })
        }
        Algorithm::BayesAcqValueStop => Some(view.proposal.value),
    }
}

/// Runs one seed of an experiment; the returned record carries the regret.
pub fn run_single(
    cfg: &ExperimentConfig,
    objective: &Objective,
    seed: u64,
) -> Result<(RunResult, RunRecord)> {
    let mut bcfg = cfg.run_config(seed);
    match cfg.algorithm {
        Algorithm::Blossom => bcfg.strategy = Strategy::Blossom,
        Algorithm::EiWithPiStop => {
            bcfg.strategy = Strategy::BayesOnly;
            bcfg.bayes_acquisition = BayesAcquisition::ExpectedImprovement;
        }
        Algorithm::BayesAcqValueStop => {
            bcfg.strategy = Strategy::BayesOnly;
            bcfg.bayes_acquisition = BayesAcquisition::PesDiscrete;
        }
    }
    let mut statistic = None;
    let stop = cfg.stop_param;
    let algorithm = cfg.algorithm;
    let mut hook = |view: &IterationView| match stop_statistic(algorithm, view) {
        Some(s) => {
            statistic = Some(s);
            s < stop
        }
        None => false,
    };
    let hook_ref: Option<&mut dyn StopHook> = match algorithm {
        Algorithm::Blossom => None,
        _ => Some(&mut hook),
    };
    let start = std::time::Instant::now();
    let (result, known_minimum) = match objective {
        Objective::Benchmark(b) => {
            let mut f = |x: &[f64]| b.eval(x);
            let result = run_with_hook(&mut f, &b.domain, &bcfg, hook_ref)?;
            (result, b.known_minimum.unwrap_or(0.0))
        }
        Objective::GpDraw { dim } => {
            let kernel =
                KernelSpec::new(KernelFamily::Matern52, 1.0, vec![GP_DRAW_LENGTHSCALE; *dim])?;
            let mut draw = draw_gp_objective(
                kernel,
                Domain::symmetric_unit(*dim),
                rng::derive_seed(seed, &[0x6472_6177]),
            )?;
            let domain = draw.domain.clone();
            let result = {
                let mut f = |x: &[f64]| draw.evaluate(x);
                run_with_hook(&mut f, &domain, &bcfg, hook_ref)?
            };
            let (_, oracle) = draw.oracle_minimum();
            // the run itself may have found a point below the oracle's
            let observed = result
                .trace
                .iter()
                .map(|s| s.y)
                .fold(f64::INFINITY, f64::min);
            (result, oracle.min(observed))
        }
    };
    let regret = if result.recommended_y.is_finite() {
        (result.recommended_y - known_minimum).max(0.0)
    } else {
        f64::INFINITY
    };
    let record = RunRecord {
        objective: objective.name(),
        algorithm: cfg.algorithm.as_str().to_string(),
        stop_param: cfg.stop_param,
        seed,
        terminated_reason: result.terminated_reason,
        total_evals: result.total_evals,
        bayes_iterations: result.bayes_iterations,
        recommendation: result.recommendation.clone(),
        recommended_y: result.recommended_y,
        known_minimum,
        regret,
        stop_statistic: statistic,
        error: result.error.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((result, record))
}

/// File stem shared by a run's trace (`.csv`) and metadata (`.json`).
pub fn run_stem(objective: &str, algorithm: Algorithm, stop_param: f64, seed: u64) -> String {
    let clean: String = objective
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{clean}_{}_{stop_param:e}_seed{seed}", algorithm.as_str())
}

/// Writes a run's trace and metadata into `dir`; returns the trace path.
pub fn write_run(
    dir: &Path,
    trace: &[StepRecord],
    record: &RunRecord,
    algorithm: Algorithm,
    dim: usize,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let stem = run_stem(&record.objective, algorithm, record.stop_param, record.seed);
    let trace_path = dir.join(format!("{stem}.csv"));
    trace::write_trace_file(&trace_path, trace, dim)?;
    std::fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(record)?,
    )?;
    Ok(trace_path)
}

/// Runs every seed sequentially, writing each run's files as it finishes.
/// A run that fails is recorded with an error reason and the experiment
/// continues; configuration problems abort before any run starts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let objective = Objective::new(&cfg.objective, cfg.dim)?;
    let dim = objective.dimension();
    cfg.run_config(cfg.seeds[0]).validate(dim)?;
    let mut records = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let record = match run_single(cfg, &objective, seed) {
            Ok((result, record)) => {
                write_run(&cfg.output_dir, &result.trace, &record, cfg.algorithm, dim)?;
                record
            }
            Err(e) => {
                let record = RunRecord {
                    objective: objective.name(),
                    algorithm: cfg.algorithm.as_str().to_string(),
                    stop_param: cfg.stop_param,
                    seed,
                    terminated_reason: TerminationReason::Error,
                    total_evals: 0,
                    bayes_iterations: 0,
                    recommendation: Vec::new(),
                    recommended_y: f64::NAN,
                    known_minimum: f64::NAN,
                    regret: f64::INFINITY,
                    stop_statistic: None,
                    error: Some(e.to_string()),
                    wall_time_s: 0.0,
                };
                write_run(&cfg.output_dir, &[], &record, cfg.algorithm, dim)?;
                record
            }
        };
        records.push(record);
    }
    Ok(records)
}
