//! Per-trial records, per-cell aggregates and artifact writing.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// One row of `trials.csv`. Columns that do not apply to an experiment are empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub s: f64,
    pub lambda0: f64,
    pub estimator: String,
    pub l2_error: Option<f64>,
    pub success: Option<u8>,
    pub detections: Option<usize>,
    pub false_alarms: Option<usize>,
    pub cell: usize,
    pub trial: usize,
    pub matrix: String,
    pub threshold: Option<f64>,
    pub lambda_h: Option<f64>,
    pub s_over_sqrt_n_lambda_h: Option<f64>,
    pub theorem1_bound: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub objective: Option<f64>,
    /// Sparsity of a thresholded approximation, where one is scored.
    pub sparsity_level: Option<usize>,
    pub metric: Option<String>,
    pub value: Option<f64>,
}

/// One row of `roc.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub cell: usize,
    pub matrix: String,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub s: f64,
    pub lambda0: f64,
    pub estimator: String,
    pub threshold: f64,
    pub pd: f64,
    pub pf: f64,
}

/// One row of `aggregate.csv`: mean and standard error over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cell: usize,
    pub matrix: String,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub s: f64,
    pub lambda0: f64,
    pub estimator: String,
    pub threshold: Option<f64>,
    pub sparsity_level: Option<usize>,
    pub metric: Option<String>,
    pub count: usize,
    pub l2_error_mean: Option<f64>,
    pub l2_error_se: Option<f64>,
    pub success_rate: Option<f64>,
    pub success_se: Option<f64>,
    pub detections_mean: Option<f64>,
    pub false_alarms_mean: Option<f64>,
    pub lambda_h_mean: Option<f64>,
    pub value_mean: Option<f64>,
    pub value_se: Option<f64>,
    pub converged_fraction: Option<f64>,
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Standard error of the mean; needs at least two values.
pub fn standard_error(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    Some((var / xs.len() as f64).sqrt())
}

/// Groups records by `(cell, estimator, threshold, sparsity level, metric)`
/// in order of first appearance.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    type Key = (usize, String, Option<u64>, Option<usize>, Option<String>);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: HashMap<Key, Vec<&TrialRecord>> = HashMap::new();
    for r in records {
        let key = (
            r.cell,
            r.estimator.clone(),
            r.threshold.map(f64::to_bits),
            r.sparsity_level,
            r.metric.clone(),
        );
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let first = rows[0];
            let col = |f: &dyn Fn(&TrialRecord) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(|r| f(r)).collect() };
            let l2 = col(&|r| r.l2_error);
            let succ = col(&|r| r.success.map(f64::from));
            let det = col(&|r| r.detections.map(|d| d as f64));
            let fa = col(&|r| r.false_alarms.map(|d| d as f64));
            let lh = col(&|r| r.lambda_h);
            let val = col(&|r| r.value);
            let conv = col(&|r| r.converged.map(|c| f64::from(u8::from(c))));
            AggregateRow {
                cell: first.cell,
                matrix: first.matrix.clone(),
                n: first.n,
                p: first.p,
                k: first.k,
                s: first.s,
                lambda0: first.lambda0,
                estimator: first.estimator.clone(),
                threshold: first.threshold,
                sparsity_level: first.sparsity_level,
                metric: first.metric.clone(),
                count: rows.len(),
                l2_error_mean: mean(&l2),
                l2_error_se: standard_error(&l2),
                success_rate: mean(&succ),
                success_se: standard_error(&succ),
                detections_mean: mean(&det),
                false_alarms_mean: mean(&fa),
                lambda_h_mean: mean(&lh),
                value_mean: mean(&val),
                value_se: standard_error(&val),
                converged_fraction: mean(&conv),
            }
        })
        .collect()
}

/// Everything an experiment produces before it touches the file system.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub roc: Vec<RocRow>,
    /// Experiment-specific derived statistics.
    pub results: serde_json::Value,
    /// Per-cell conditions worth reporting (violated preconditions, warnings).
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub results: serde_json::Value,
    pub notes: Vec<String>,
    pub files: Vec<String>,
}

/// Paths written by a run plus the summary they contain.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Summary,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Writes `trials.csv`, `aggregate.csv`, `roc.csv` (when present) and `summary.json`.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<Manifest, CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();

    let trials = dir.join("trials.csv");
    write_csv(&trials, &out.records)?;
    files.push(trials);

    let agg = dir.join("aggregate.csv");
    write_csv(&agg, &aggregate(&out.records))?;
    files.push(agg);

    if !out.roc.is_empty() {
        let roc = dir.join("roc.csv");
        write_csv(&roc, &out.roc)?;
        files.push(roc);
    }

    let summary_path = dir.join("summary.json");
    let mut names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().expect("file name").to_string_lossy().into_owned())
        .collect();
    names.push("summary.json".into());
    let summary = Summary {
        config: cfg.clone(),
        results: out.results.clone(),
        notes: out.notes.clone(),
        files: names,
    };
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&summary_path, text + "\n").map_err(|e| CliError::io(&summary_path, e))?;
    files.push(summary_path);

    Ok(Manifest {
        output_dir: dir.clone(),
        files,
        summary,
    })
}
