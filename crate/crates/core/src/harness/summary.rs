//! Table-style summaries of finished experiments.
//!
//! Summaries are recomputed from the files an experiment leaves behind: each
//! run's metadata record supplies the objective, method and final regret, and
//! the number of steps is the row count of its trace file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trace::{format_real, read_trace_file};
use super::RunRecord;
use crate::controller::TerminationReason;
use crate::error::{Error, Result};

/// One (objective, method) cell of the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub objective: String,
    /// Method label: algorithm name and stopping parameter, e.g. `blossom 1e-2`.
    pub algorithm: String,
    pub mean_regret: f64,
    /// Mean number of objective evaluations, local-phase evaluations included.
    pub mean_steps: f64,
    /// Mean over runs of `steps · regret` (not the product of the means).
    pub mean_step_regret_product: f64,
    pub n_runs: usize,
    /// Mean number of model-based proposals (initialization and local phase excluded).
    pub mean_bayes_iterations: f64,
    pub n_max_iterations: usize,
}

/// A finished run as seen by the summarizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub objective: String,
    pub algorithm: String,
    pub regret: f64,
    pub steps: usize,
    pub bayes_iterations: usize,
    pub terminated_reason: TerminationReason,
}

/// Fraction of runs still active after `n` steps, per method.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    /// Column labels, `objective/method`.
    pub labels: Vec<String>,
    /// `rows[n][j]` is the fraction of runs of column `j` with at least `n` steps.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub survival: SurvivalTable,
}

pub fn method_label(algorithm: &str, stop_param: f64) -> String {
    format!("{algorithm} {stop_param:e}")
}

fn collect_metadata(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() {
            collect_metadata(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

/// Loads every run found under `dir` (recursively).
pub fn load_runs(dir: &Path) -> Result<Vec<RunSummary>> {
    let mut files = Vec::new();
    collect_metadata(dir, &mut files)?;
    files.sort();
    let mut runs = Vec::new();
    for meta in files {
        let text = std::fs::read_to_string(&meta)?;
        let Ok(record) = serde_json::from_str::<RunRecord>(&text) else {
            // not a run record (for example a summary written into the same directory)
            continue;
        };
        let trace = read_trace_file(&meta.with_extension("csv"))?;
        runs.push(RunSummary {
            objective: record.objective,
            algorithm: method_label(&record.algorithm, record.stop_param),
            regret: record.regret,
            steps: trace.len(),
            bayes_iterations: record.bayes_iterations,
            terminated_reason: record.terminated_reason,
        });
    }
    if runs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no completed runs found in {}",
            dir.display()
        )));
    }
    Ok(runs)
}

pub fn summary_rows(runs: &[RunSummary]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, &str), Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        groups
            .entry((&r.objective, &r.algorithm))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((objective, algorithm), rs)| {
            let n = rs.len() as f64;
            let mean = |f: &dyn Fn(&RunSummary) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            SummaryRow {
                objective: objective.to_string(),
                algorithm: algorithm.to_string(),
                mean_regret: mean(&|r| r.regret),
                mean_steps: mean(&|r| r.steps as f64),
                mean_step_regret_product: mean(&|r| r.steps as f64 * r.regret),
                n_runs: rs.len(),
                mean_bayes_iterations: mean(&|r| r.bayes_iterations as f64),
                n_max_iterations: rs
                    .iter()
                    .filter(|r| r.terminated_reason == TerminationReason::MaxIterations)
                    .count(),
            }
        })
        .collect()
}

pub fn survival_table(runs: &[RunSummary]) -> SurvivalTable {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for r in runs {
        groups
            .entry(format!("{}/{}", r.objective, r.algorithm))
            .or_default()
            .push(r.steps);
    }
    let max_steps = runs.iter().map(|r| r.steps).max().unwrap_or(0);
    let rows = (0..=max_steps)
        .map(|n| {
            groups
                .values()
                .map(|steps| steps.iter().filter(|&&s| s >= n).count() as f64 / steps.len() as f64)
                .collect()
        })
        .collect();
    SurvivalTable {
        labels: groups.into_keys().collect(),
        rows,
    }
}

pub fn summarize(dir: &Path) -> Result<Summary> {
    let runs = load_runs(dir)?;
    Ok(Summary {
        rows: summary_rows(&runs),
        survival: survival_table(&runs),
    })
}

/// Three blocks (final regret, steps, steps × regret) with one line per
/// objective and one column per method.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let mut methods: Vec<&str> = rows.iter().map(|r| r.algorithm.as_str()).collect();
    methods.sort_unstable();
    methods.dedup();
    let mut objectives: Vec<&str> = rows.iter().map(|r| r.objective.as_str()).collect();
    objectives.sort_unstable();
    objectives.dedup();
    let width = objectives
        .iter()
        .map(|o| o.len())
        .chain(["Steps x regret".len()])
        .max()
        .unwrap_or(0);
    let col = methods.iter().map(|m| m.len()).max().unwrap_or(0).max(10);
    let blocks: [(&str, fn(&SummaryRow) -> f64); 3] = [
        ("Final regret", |r| r.mean_regret),
        ("Steps", |r| r.mean_steps),
        ("Steps x regret", |r| r.mean_step_regret_product),
    ];
    let mut out = String::new();
    for (title, value) in blocks {
        let _ = write!(out, "{title:<width$}");
        for m in &methods {
            let _ = write!(out, "  {m:>col$}");
        }
        out.push('\n');
        for o in &objectives {
            let _ = write!(out, "{o:<width$}");
            for m in &methods {
                let cell = rows
                    .iter()
                    .find(|r| r.objective == *o && r.algorithm == *m)
                    .map_or_else(|| "-".to_string(), |r| format!("{:.3e}", value(r)));
                let _ = write!(out, "  {cell:>col$}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "objective",
        "algorithm",
        "mean_regret",
        "mean_steps",
        "mean_step_regret_product",
        "n_runs",
        "mean_bayes_iterations",
        "n_max_iterations",
    ])?;
    for r in rows {
        w.write_record([
            r.objective.clone(),
            r.algorithm.clone(),
            format_real(r.mean_regret),
            format_real(r.mean_steps),
            format_real(r.mean_step_regret_product),
            r.n_runs.to_string(),
            format_real(r.mean_bayes_iterations),
            r.n_max_iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_survival_csv(path: &Path, table: &SurvivalTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["n".to_string()];
    header.extend(table.labels.iter().cloned());
    w.write_record(&header)?;
    for (n, row) in table.rows.iter().enumerate() {
        let mut rec = vec![n.to_string()];
        rec.extend(row.iter().map(|v| format_real(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Paths written by [`write_summary`]: the summary CSV itself, the survival
/// CSV and the text table, the latter two next to the first.
pub fn companion_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "summary".into());
    let dir = out.parent().unwrap_or(Path::new(""));
    (
        dir.join(format!("{stem}_survival.csv")),
        dir.join(format!("{stem}_table.txt")),
    )
}

pub fn write_summary(out: &Path, summary: &Summary) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_summary_csv(out, &summary.rows)?;
    let (survival, table) = companion_paths(out);
    write_survival_csv(&survival, &summary.survival)?;
    std::fs::write(table, render_table(&summary.rows))?;
    Ok(())
}
