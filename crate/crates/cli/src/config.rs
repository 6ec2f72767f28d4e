//! JSON experiment configuration.
//!
//! Every key except `schema_version` and `experiment` is optional; missing
//! keys take the experiment's defaults (see [`crate::experiments`]). Unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use poisson_sparse::bounds::FanoConfig;
use poisson_sparse::sensing::MatrixKind;
use poisson_sparse::solver::{ConstraintMode, StepRule};
use poisson_sparse::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Estimators the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Poisson negative log-likelihood.
    PoissonMl,
    /// Rate-weighted squared residuals.
    RescaledLasso,
    /// Plain squared residuals.
    GaussianMl,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::PoissonMl => "poisson_ml",
            Estimator::RescaledLasso => "rescaled_lasso",
            Estimator::GaussianMl => "gaussian_ml",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Solver knobs exposed in the config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub obj_tol: f64,
    pub step_tol: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Start the rescaled LASSO from the least-squares solution.
    pub rlasso_warm_start: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            obj_tol: d.obj_tol,
            step_tol: d.step_tol,
            max_iters: d.max_iters,
            step_rule: d.step_rule,
            rlasso_warm_start: false,
        }
    }
}

impl SolverSettings {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            obj_tol: self.obj_tol,
            step_tol: self.step_tol,
            max_iters: self.max_iters,
            step_rule: self.step_rule,
            ..SolverConfig::default()
        }
    }
}

/// Config as written by the user.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema_version: u32,
    pub experiment: String,
    pub p: Option<usize>,
    pub k_list: Option<Vec<usize>>,
    pub n_list: Option<Vec<usize>>,
    pub s_list: Option<Vec<f64>>,
    /// One constant base rate, or a list swept as a grid axis.
    pub lambda0: Option<OneOrMany<f64>>,
    pub matrix: Option<OneOrMany<MatrixKind>>,
    pub estimators: Option<Vec<Estimator>>,
    pub constraint_mode: Option<ConstraintMode>,
    pub thresholds: Option<Vec<f64>>,
    /// Divide every threshold by `k`.
    pub thresholds_per_k: Option<bool>,
    pub trials: Option<usize>,
    pub master_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// Reuse one design (top rows of the largest-n draw) for every trial.
    pub fix_matrix: Option<bool>,
    pub zeta: Option<f64>,
    /// Random cone samples per sparsity level for the RE estimate.
    pub re_trials: Option<usize>,
    /// Fraction of rows used for fitting in held-out comparisons.
    pub train_fraction: Option<f64>,
    pub fano: Option<FanoConfig>,
    pub solver: Option<SolverSettings>,
}

/// Fully resolved configuration; echoed verbatim in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: String,
    pub p: usize,
    pub k_list: Vec<usize>,
    pub n_list: Vec<usize>,
    pub s_list: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub matrix: Vec<MatrixKind>,
    pub estimators: Vec<Estimator>,
    pub constraint_mode: ConstraintMode,
    pub thresholds: Vec<f64>,
    pub thresholds_per_k: bool,
    pub trials: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub fix_matrix: bool,
    pub zeta: f64,
    pub re_trials: usize,
    pub train_fraction: f64,
    pub fano: FanoConfig,
    pub solver: SolverSettings,
}

impl ExperimentConfig {
    /// Overlays the user's keys on `defaults`.
    pub fn resolve(raw: RawConfig, defaults: ExperimentConfig) -> Result<Self, CliError> {
        if raw.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        let d = defaults;
        let cfg = ExperimentConfig {
            schema_version: raw.schema_version,
            experiment: raw.experiment,
            p: raw.p.unwrap_or(d.p),
            k_list: raw.k_list.unwrap_or(d.k_list),
            n_list: raw.n_list.unwrap_or(d.n_list),
            s_list: raw.s_list.unwrap_or(d.s_list),
            lambda0: raw.lambda0.map(OneOrMany::into_vec).unwrap_or(d.lambda0),
            matrix: raw.matrix.map(OneOrMany::into_vec).unwrap_or(d.matrix),
            estimators: raw.estimators.unwrap_or(d.estimators),
            constraint_mode: raw.constraint_mode.unwrap_or(d.constraint_mode),
            thresholds: raw.thresholds.unwrap_or(d.thresholds),
            thresholds_per_k: raw.thresholds_per_k.unwrap_or(d.thresholds_per_k),
            trials: raw.trials.unwrap_or(d.trials),
            master_seed: raw.master_seed.unwrap_or(d.master_seed),
            output_dir: raw.output_dir.unwrap_or(d.output_dir),
            fix_matrix: raw.fix_matrix.unwrap_or(d.fix_matrix),
            zeta: raw.zeta.unwrap_or(d.zeta),
            re_trials: raw.re_trials.unwrap_or(d.re_trials),
            train_fraction: raw.train_fraction.unwrap_or(d.train_fraction),
            fano: raw.fano.unwrap_or(d.fano),
            solver: raw.solver.unwrap_or(d.solver),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.p == 0 {
            return bad("p must be at least 1".into());
        }
        for (name, empty) in [
            ("k_list", self.k_list.is_empty()),
            ("n_list", self.n_list.is_empty()),
            ("s_list", self.s_list.is_empty()),
            ("lambda0", self.lambda0.is_empty()),
            ("matrix", self.matrix.is_empty()),
            ("estimators", self.estimators.is_empty()),
            ("thresholds", self.thresholds.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        if let Some(k) = self.k_list.iter().find(|&&k| k == 0 || k > self.p) {
            return bad(format!("k = {k} must lie in 1..={}", self.p));
        }
        if self.n_list.contains(&0) {
            return bad("every n must be at least 1".into());
        }
        if let Some(s) = self.s_list.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad(format!("amplitude {s} must be positive"));
        }
        if let Some(l) = self.lambda0.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return bad(format!("base rate {l} must be nonnegative"));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return bad(format!("threshold {t} must be nonnegative"));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return bad(format!("zeta {} must lie in (0, 1)", self.zeta));
        }
        if self.re_trials == 0 {
            return bad("re_trials must be at least 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} must lie in (0, 1)", self.train_fraction));
        }
        for kind in &self.matrix {
            kind.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        self.solver.to_config().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    /// Thresholds in descending order, scaled by `1/k` when requested.
    pub fn thresholds_for(&self, k: usize) -> Vec<f64> {
        let scale = if self.thresholds_per_k { 1.0 / k as f64 } else { 1.0 };
        let mut t: Vec<f64> = self.thresholds.iter().map(|x| x * scale).collect();
        t.sort_by(|a, b| b.total_cmp(a));
        t
    }
}

pub fn read_raw_config(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_raw_config(&text)
}

pub fn parse_raw_config(text: &str) -> Result<RawConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
}
