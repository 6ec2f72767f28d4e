//! Registry of synthetic studies and their runners.
//!
//! Every random quantity is drawn from a stream keyed by the master seed and
//! the indices of the grid cell and trial that need it, so results do not
//! depend on scheduling. Designs and observations use per-row streams: the
//! `n`-row instance is a prefix of any larger one, which gives common random
//! numbers along the `n` axis.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use poisson_sparse::bounds::{self, BoundInputs};
use poisson_sparse::eval::{self, Family};
use poisson_sparse::sensing::{self, MatrixKind, MatrixSpec};
use poisson_sparse::simulate::{self, SignalSpec};
use poisson_sparse::solver::{self, ConstraintMode};
use poisson_sparse::{rng, AffineRateModel, ConstraintSet, Loss, Matrix, ObservationSet, ParamVector, SolveResult};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{read_raw_config, Estimator, ExperimentConfig, SolverSettings, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::{mean, write_outputs, ExperimentOutput, Manifest, RocRow, TrialRecord};

const TAG_MATRIX: u64 = 1;
const TAG_SIGNAL: u64 = 2;
const TAG_OBS: u64 = 3;
const TAG_RE: u64 = 4;
const TAG_FANO: u64 = 5;
const TAG_BERNSTEIN: u64 = 6;
const TAG_CURVATURE: u64 = 7;

type RunFn = fn(&ExperimentConfig) -> Result<ExperimentOutput, CliError>;

pub struct ExperimentInfo {
    pub name: &'static str,
    pub about: &'static str,
    /// Config keys the experiment reads besides `schema_version`, `experiment`,
    /// `master_seed`, `output_dir` and `trials`.
    pub keys: &'static [&'static str],
    defaults: fn() -> ExperimentConfig,
    run: RunFn,
}

impl ExperimentInfo {
    pub fn defaults(&self) -> ExperimentConfig {
        (self.defaults)()
    }
}

static REGISTRY: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "lambda-h-scaling",
        about: "harmonic mean of the rates versus amplitude s for several designs",
        keys: &["p", "k_list", "n_list", "s_list", "lambda0", "matrix", "fix_matrix"],
        defaults: defaults_lambda_h,
        run: run_lambda_h,
    },
    ExperimentInfo {
        name: "tightness",
        about: "l2 error against s/sqrt(n lambda_h), the high-probability upper bound and sqrt(k) scaling",
        keys: &[
            "p", "k_list", "n_list", "s_list", "lambda0", "matrix", "estimators", "constraint_mode", "fix_matrix",
            "zeta", "re_trials", "solver",
        ],
        defaults: defaults_tightness,
        run: run_tightness,
    },
    ExperimentInfo {
        name: "gauss-vs-poisson",
        about: "Poisson likelihood against Gaussian (least-squares) likelihood on Poisson data",
        keys: &["p", "k_list", "n_list", "s_list", "lambda0", "matrix", "estimators", "constraint_mode", "fix_matrix", "solver"],
        defaults: defaults_gauss_vs_poisson,
        run: run_gauss_vs_poisson,
    },
    ExperimentInfo {
        name: "support-vs-n",
        about: "support recovery probability as a function of n",
        keys: &[
            "p", "k_list", "n_list", "s_list", "lambda0", "matrix", "estimators", "constraint_mode", "thresholds",
            "thresholds_per_k", "fix_matrix", "solver",
        ],
        defaults: defaults_support_vs_n,
        run: run_support_vs_n,
    },
    ExperimentInfo {
        name: "support-vs-k",
        about: "support recovery probability as a function of k",
        keys: &[
            "p", "k_list", "n_list", "s_list", "lambda0", "matrix", "estimators", "constraint_mode", "thresholds",
            "thresholds_per_k", "fix_matrix", "solver",
        ],
        defaults: defaults_support_vs_k,
        run: run_support_vs_k,
    },
    ExperimentInfo {
        name: "roc",
        about: "detection versus false-alarm rate over a threshold sweep",
        keys: &[
            "p", "k_list", "n_list", "s_list", "lambda0", "matrix", "estimators", "constraint_mode", "thresholds",
            "thresholds_per_k", "fix_matrix", "solver",
        ],
        defaults: defaults_roc,
        run: run_roc,
    },
    ExperimentInfo {
        name: "bounds-report",
        about: "upper-bound constants, minimax lower bound and curvature check on generated instances",
        keys: &["p", "k_list", "n_list", "s_list", "lambda0", "matrix", "fix_matrix", "zeta", "re_trials", "fano"],
        defaults: defaults_bounds_report,
        run: run_bounds_report,
    },
    ExperimentInfo {
        name: "bernstein-check",
        about: "coverage of the mean relative deviation radius",
        keys: &["p", "k_list", "n_list", "s_list", "lambda0", "matrix", "zeta"],
        defaults: defaults_bernstein,
        run: run_bernstein,
    },
    ExperimentInfo {
        name: "model-comparison",
        about: "Bayes factor by sparsity and held-out log-likelihood, Poisson versus discretized Gaussian",
        keys: &["p", "k_list", "n_list", "s_list", "lambda0", "matrix", "constraint_mode", "fix_matrix", "train_fraction", "solver"],
        defaults: defaults_model_comparison,
        run: run_model_comparison,
    },
];

/// Registry in its fixed order.
pub fn list_experiments() -> &'static [ExperimentInfo] {
    REGISTRY
}

pub fn find_experiment(name: &str) -> Result<&'static ExperimentInfo, CliError> {
    REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| {
        let names: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
        CliError::Usage(format!("unknown experiment {name:?}; available: {}", names.join(", ")))
    })
}

/// Defaults of `name`, i.e. the config an empty JSON object resolves to.
pub fn default_config(name: &str) -> Result<ExperimentConfig, CliError> {
    find_experiment(name).map(ExperimentInfo::defaults)
}

/// Reads, resolves and runs a config file, then writes its artifacts.
pub fn run_config_file(path: &std::path::Path) -> Result<Manifest, CliError> {
    let raw = read_raw_config(path)?;
    let defaults = default_config(&raw.experiment)?;
    let cfg = ExperimentConfig::resolve(raw, defaults)?;
    run_experiment(&cfg)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest, CliError> {
    let out = execute(cfg)?;
    write_outputs(cfg, &out)
}

/// Runs an experiment without writing anything.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    cfg.validate()?;
    (find_experiment(&cfg.experiment)?.run)(cfg)
}

// ---------------------------------------------------------------------------
// defaults

fn base_defaults(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        experiment: name.to_string(),
        p: 400,
        k_list: vec![5],
        n_list: vec![100],
        s_list: vec![1.0],
        lambda0: vec![1.0],
        matrix: vec![MatrixKind::Uniform01],
        estimators: vec![Estimator::PoissonMl],
        constraint_mode: ConstraintMode::SumAtMost,
        thresholds: vec![1e-4],
        thresholds_per_k: false,
        trials: 10,
        master_seed: 1,
        output_dir: PathBuf::from("results").join(name),
        fix_matrix: false,
        zeta: 0.1,
        re_trials: 200,
        train_fraction: 0.8,
        fano: bounds::FanoConfig::default(),
        solver: SolverSettings::default(),
    }
}

fn defaults_lambda_h() -> ExperimentConfig {
    ExperimentConfig {
        s_list: vec![10.0, 100.0, 1000.0, 10000.0],
        matrix: vec![MatrixKind::Uniform01, MatrixKind::beta_1_3(), MatrixKind::alt_dist()],
        trials: 50,
        ..base_defaults("lambda-h-scaling")
    }
}

fn defaults_tightness() -> ExperimentConfig {
    ExperimentConfig {
        n_list: vec![100, 200, 300],
        s_list: vec![1.0, 10.0, 100.0, 1000.0, 20000.0],
        lambda0: vec![4.0],
        matrix: vec![MatrixKind::Uniform01, MatrixKind::alt_dist()],
        fix_matrix: true,
        ..base_defaults("tightness")
    }
}

fn defaults_gauss_vs_poisson() -> ExperimentConfig {
    ExperimentConfig {
        s_list: vec![1.0, 10.0, 100.0, 1000.0],
        lambda0: vec![0.01],
        matrix: vec![MatrixKind::beta_1_3()],
        estimators: vec![Estimator::PoissonMl, Estimator::GaussianMl],
        trials: 100,
        ..base_defaults("gauss-vs-poisson")
    }
}

fn defaults_support_vs_n() -> ExperimentConfig {
    ExperimentConfig {
        k_list: vec![40],
        n_list: vec![25, 50, 100, 150, 200, 250, 300, 350, 400],
        lambda0: vec![100.0],
        matrix: vec![MatrixKind::alt_dist()],
        estimators: vec![Estimator::PoissonMl, Estimator::RescaledLasso],
        thresholds: vec![1e-4],
        trials: 100,
        fix_matrix: true,
        ..base_defaults("support-vs-n")
    }
}

fn defaults_support_vs_k() -> ExperimentConfig {
    ExperimentConfig {
        p: 200,
        k_list: vec![1, 2, 5, 10, 20, 40],
        lambda0: vec![100.0],
        matrix: vec![MatrixKind::alt_dist()],
        estimators: vec![Estimator::PoissonMl, Estimator::RescaledLasso],
        thresholds: vec![0.01],
        thresholds_per_k: true,
        trials: 100,
        fix_matrix: true,
        ..base_defaults("support-vs-k")
    }
}

fn defaults_roc() -> ExperimentConfig {
    ExperimentConfig {
        p: 200,
        k_list: vec![20],
        lambda0: vec![100.0],
        matrix: vec![MatrixKind::alt_dist()],
        estimators: vec![Estimator::PoissonMl, Estimator::RescaledLasso],
        thresholds: vec![1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001],
        thresholds_per_k: true,
        trials: 100,
        fix_matrix: true,
        ..base_defaults("roc")
    }
}

fn defaults_bounds_report() -> ExperimentConfig {
    ExperimentConfig {
        p: 100,
        k_list: vec![10],
        n_list: vec![200],
        s_list: vec![100.0],
        trials: 1,
        fix_matrix: true,
        ..base_defaults("bounds-report")
    }
}

fn defaults_bernstein() -> ExperimentConfig {
    ExperimentConfig {
        p: 50,
        s_list: vec![1.0],
        lambda0: vec![5.0, 50.0, 500.0],
        trials: 10_000,
        fix_matrix: true,
        ..base_defaults("bernstein-check")
    }
}

fn defaults_model_comparison() -> ExperimentConfig {
    ExperimentConfig {
        p: 50,
        n_list: vec![50],
        s_list: vec![100.0],
        estimators: vec![Estimator::PoissonMl, Estimator::RescaledLasso],
        trials: 20,
        ..base_defaults("model-comparison")
    }
}

// ---------------------------------------------------------------------------
// shared plumbing

#[derive(Debug, Clone, Copy)]
struct Cell {
    idx: usize,
    kind_idx: usize,
    kind: MatrixKind,
    n_idx: usize,
    n: usize,
    k_idx: usize,
    k: usize,
    s_idx: usize,
    s: f64,
    l_idx: usize,
    lambda0: f64,
}

/// Grid in the order matrix, n, k, s, lambda0.
fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for (kind_idx, &kind) in cfg.matrix.iter().enumerate() {
        for (n_idx, &n) in cfg.n_list.iter().enumerate() {
            for (k_idx, &k) in cfg.k_list.iter().enumerate() {
                for (s_idx, &s) in cfg.s_list.iter().enumerate() {
                    for (l_idx, &lambda0) in cfg.lambda0.iter().enumerate() {
                        out.push(Cell {
                            idx: out.len(),
                            kind_idx,
                            kind,
                            n_idx,
                            n,
                            k_idx,
                            k,
                            s_idx,
                            s,
                            l_idx,
                            lambda0,
                        });
                    }
                }
            }
        }
    }
    out
}

fn seed(cfg: &ExperimentConfig, tag: u64, path: &[u64]) -> u64 {
    let mut full = Vec::with_capacity(path.len() + 1);
    full.push(tag);
    full.extend_from_slice(path);
    rng::derive_seed(cfg.master_seed, &full)
}

/// Design for `cell` in `trial`. With `fix_matrix` one draw per matrix kind
/// serves every trial; its top `n` rows are used.
fn design(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> Result<Matrix, CliError> {
    let seed = if cfg.fix_matrix {
        seed(cfg, TAG_MATRIX, &[cell.kind_idx as u64])
    } else {
        seed(cfg, TAG_MATRIX, &[cell.kind_idx as u64, trial as u64])
    };
    Ok(sensing::generate_matrix(&MatrixSpec {
        kind: cell.kind,
        n: cell.n,
        p: cfg.p,
        seed,
    })?)
}

fn signal(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> Result<(ParamVector, u64), CliError> {
    let sd = seed(cfg, TAG_SIGNAL, &[cell.kind_idx as u64, cell.k_idx as u64, trial as u64]);
    let w = simulate::generate_sparse_signal(&SignalSpec {
        p: cfg.p,
        k: cell.k,
        s: cell.s,
        seed: sd,
    })?;
    Ok((w, sd))
}

/// Observation seed; independent of `n` so that rows are shared along the n axis.
fn obs_seed(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> u64 {
    seed(
        cfg,
        TAG_OBS,
        &[cell.kind_idx as u64, cell.k_idx as u64, cell.s_idx as u64, cell.l_idx as u64, trial as u64],
    )
}

struct Instance {
    model: AffineRateModel,
    w_star: ParamVector,
    y: ObservationSet,
    seed: u64,
}

fn instance(cfg: &ExperimentConfig, cell: &Cell, trial: usize, signal_trial: usize) -> Result<Instance, CliError> {
    let a = design(cfg, cell, trial)?;
    let model = AffineRateModel::with_constant_base(cell.lambda0, a)?;
    let (w_star, _) = signal(cfg, cell, signal_trial)?;
    let seed = obs_seed(cfg, cell, trial);
    let y = simulate::sample_observations(&model, &w_star, seed)?;
    Ok(Instance { model, w_star, y, seed })
}

fn constraints(cfg: &ExperimentConfig, s: f64) -> Result<ConstraintSet, CliError> {
    Ok(ConstraintSet::new(s, cfg.constraint_mode)?)
}

fn fit(
    est: Estimator,
    model: &AffineRateModel,
    y: &ObservationSet,
    cs: &ConstraintSet,
    settings: &SolverSettings,
) -> poisson_sparse::Result<SolveResult> {
    let config = settings.to_config();
    match est {
        Estimator::PoissonMl => solver::minimize(Loss::PoissonNll, model, y, cs, &config, None),
        Estimator::GaussianMl => solver::minimize(Loss::LeastSquares, model, y, cs, &config, None),
        Estimator::RescaledLasso if settings.rlasso_warm_start => {
            solver::minimize_rescaled_lasso_warm(model, y, cs, &config)
        }
        Estimator::RescaledLasso => solver::minimize(Loss::RescaledLasso, model, y, cs, &config, None),
    }
}

fn base_record(cfg: &ExperimentConfig, cell: &Cell, trial: usize, seed: u64, estimator: &str) -> TrialRecord {
    TrialRecord {
        seed,
        n: cell.n,
        p: cfg.p,
        k: cell.k,
        s: cell.s,
        lambda0: cell.lambda0,
        estimator: estimator.to_string(),
        cell: cell.idx,
        trial,
        matrix: cell.kind.label(),
        ..Default::default()
    }
}

fn fit_record(base: &TrialRecord, res: &SolveResult, w_star: &ParamVector) -> Result<TrialRecord, CliError> {
    Ok(TrialRecord {
        l2_error: Some(eval::l2_error(&res.w_hat, w_star)?),
        converged: Some(res.converged),
        iterations: Some(res.iterations),
        objective: Some(res.objective),
        ..base.clone()
    })
}

/// Recoverable per-trial failures (domain, infeasible) become notes.
fn soft<T>(r: Result<T, CliError>, context: impl FnOnce() -> String, notes: &mut Vec<String>) -> Result<Option<T>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(CliError::Core(e)) if e.is_domain() || matches!(e, poisson_sparse::Error::Contract(_)) => {
            notes.push(format!("{}: {e}", context()));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn jobs(cfg: &ExperimentConfig) -> Vec<(Cell, usize)> {
    cells(cfg)
        .into_iter()
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect()
}

#[derive(Default)]
struct JobOutput {
    records: Vec<TrialRecord>,
    notes: Vec<String>,
    estimates: Vec<(Estimator, ParamVector, ParamVector)>,
}

fn run_jobs<J: Sync>(
    items: &[J],
    f: impl Fn(&J) -> Result<JobOutput, CliError> + Sync + Send,
) -> Result<Vec<JobOutput>, CliError> {
    items.par_iter().map(f).collect()
}

fn flatten(outs: &mut [JobOutput]) -> (Vec<TrialRecord>, Vec<String>) {
    let mut records = Vec::new();
    let mut notes = Vec::new();
    for o in outs.iter_mut() {
        records.append(&mut o.records);
        notes.append(&mut o.notes);
    }
    (records, notes)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(xs)?, mean(ys)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(xs)?, mean(ys)?);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some((a, b, r2))
}

// ---------------------------------------------------------------------------
// lambda-h-scaling

fn run_lambda_h(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let jobs = jobs(cfg);
    let mut outs = run_jobs(&jobs, |(cell, trial)| {
        let mut out = JobOutput::default();
        let a = design(cfg, cell, *trial)?;
        let model = AffineRateModel::with_constant_base(cell.lambda0, a)?;
        let (w, sd) = signal(cfg, cell, *trial)?;
        let ctx = || format!("cell {} trial {trial}", cell.idx);
        if let Some(summary) = soft(model.rate_summary(&w).map_err(Into::into), ctx, &mut out.notes)? {
            out.records.push(TrialRecord {
                lambda_h: Some(summary.lambda_harmonic),
                metric: Some("lambda_h".into()),
                value: Some(summary.lambda_harmonic),
                ..base_record(cfg, cell, *trial, sd, "-")
            });
        }
        Ok(out)
    })?;
    let (records, notes) = flatten(&mut outs);

    // mean λ̄_h per cell, then a line in s per (matrix, n, k, lambda0)
    let mut per_cell: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &records {
        per_cell.entry(r.cell).or_default().extend(r.lambda_h);
    }
    let mut lines: BTreeMap<(usize, usize, usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for c in cells(cfg) {
        if let Some(m) = per_cell.get(&c.idx).and_then(|v| mean(v)) {
            let e = lines.entry((c.kind_idx, c.n_idx, c.k_idx, c.l_idx)).or_default();
            e.0.push(c.s);
            e.1.push(m);
        }
    }
    let fits: Vec<Value> = lines
        .iter()
        .map(|(&(ki, ni, kk, li), (xs, ys))| {
            let fit = linear_fit(xs, ys);
            json!({
                "matrix": cfg.matrix[ki].label(),
                "n": cfg.n_list[ni],
                "k": cfg.k_list[kk],
                "lambda0": cfg.lambda0[li],
                "s": xs,
                "mean_lambda_h": ys,
                "intercept": fit.map(|f| f.0),
                "slope": fit.map(|f| f.1),
                "r_squared": fit.map(|f| f.2),
            })
        })
        .collect();
    Ok(ExperimentOutput {
        records,
        roc: Vec::new(),
        results: json!({ "fits": fits }),
        notes,
    })
}

// ---------------------------------------------------------------------------
// tightness

fn re_key(c: &Cell) -> (usize, usize, usize) {
    (c.kind_idx, c.n_idx, c.k_idx)
}

fn re_estimate(cfg: &ExperimentConfig, cell: &Cell, a: &Matrix, trial: usize) -> Result<f64, CliError> {
    let sd = if cfg.fix_matrix {
        seed(cfg, TAG_RE, &[cell.kind_idx as u64, cell.n_idx as u64, cell.k_idx as u64])
    } else {
        seed(cfg, TAG_RE, &[cell.kind_idx as u64, cell.n_idx as u64, cell.k_idx as u64, trial as u64])
    };
    Ok(sensing::estimate_re(a, cell.k, cfg.re_trials, sd)?.gamma_hat)
}

fn run_tightness(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let all_cells = cells(cfg);
    // one RE estimate per fixed design and sparsity
    let re_cache: HashMap<(usize, usize, usize), f64> = if cfg.fix_matrix {
        let mut reps: Vec<Cell> = Vec::new();
        for c in &all_cells {
            if !reps.iter().any(|r| re_key(r) == re_key(c)) {
                reps.push(*c);
            }
        }
        reps.par_iter()
            .map(|c| Ok((re_key(c), re_estimate(cfg, c, &design(cfg, c, 0)?, 0)?)))
            .collect::<Result<HashMap<_, _>, CliError>>()?
    } else {
        HashMap::new()
    };

    let jobs = jobs(cfg);
    let mut outs = run_jobs(&jobs, |(cell, trial)| {
        let mut out = JobOutput::default();
        // direction of w* is shared by all trials: only the counts vary
        let inst = instance(cfg, cell, *trial, 0)?;
        let gamma = match re_cache.get(&re_key(cell)) {
            Some(&g) => g,
            None => re_estimate(cfg, cell, inst.model.matrix(), *trial)?,
        };
        let ctx = || format!("cell {} trial {trial}", cell.idx);
        let Some(summary) = soft(inst.model.rate_summary(&inst.w_star).map_err(Into::into), ctx, &mut out.notes)? else {
            return Ok(out);
        };
        let lh = summary.lambda_harmonic;
        let bound = if gamma > 0.0 {
            let inp = BoundInputs::from_summary(&summary, gamma, cell.k, cell.n, cfg.zeta);
            soft(bounds::theorem1_bound(&inp).map_err(Into::into), ctx, &mut out.notes)?
        } else {
            out.notes.push(format!("{}: RE estimate is zero, no upper bound", ctx()));
            None
        };
        let cs = constraints(cfg, cell.s)?;
        for &est in &cfg.estimators {
            let base = TrialRecord {
                lambda_h: Some(lh),
                s_over_sqrt_n_lambda_h: Some(cell.s / (cell.n as f64 * lh).sqrt()),
                theorem1_bound: bound,
                gamma_hat: Some(gamma),
                ..base_record(cfg, cell, *trial, inst.seed, est.name())
            };
            let res = fit(est, &inst.model, &inst.y, &cs, &cfg.solver).map_err(Into::into);
            if let Some(res) = soft(res, || format!("{} {}", ctx(), est.name()), &mut out.notes)? {
                out.records.push(fit_record(&base, &res, &inst.w_star)?);
            }
        }
        Ok(out)
    })?;
    let (records, notes) = flatten(&mut outs);
    let results = tightness_results(cfg, &records);
    Ok(ExperimentOutput {
        records,
        roc: Vec::new(),
        results,
        notes,
    })
}

/// Scatter statistics for `l2_error` against `s/√(nλ̄_h)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScatterStats {
    pub points: usize,
    pub pearson: Option<f64>,
    /// Least-squares slope of the line through the origin.
    pub slope: Option<f64>,
    /// Fraction of points within a factor two of the fitted line.
    pub within_factor_two: Option<f64>,
    /// Fraction of trials whose error is at most the high-probability upper bound.
    pub bound_coverage: Option<f64>,
}

pub fn scatter_stats(records: &[&TrialRecord]) -> ScatterStats {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| Some((r.s_over_sqrt_n_lambda_h?, r.l2_error?)))
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let slope = (sxx > 0.0).then(|| xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / sxx);
    let within = slope.filter(|_| !pts.is_empty()).map(|c| {
        pts.iter().filter(|(x, y)| *y >= 0.5 * c * x && *y <= 2.0 * c * x).count() as f64 / pts.len() as f64
    });
    let with_bound: Vec<bool> = records
        .iter()
        .filter_map(|r| Some(r.l2_error? <= r.theorem1_bound?))
        .collect();
    ScatterStats {
        points: pts.len(),
        pearson: pearson(&xs, &ys),
        slope,
        within_factor_two: within,
        bound_coverage: (!with_bound.is_empty())
            .then(|| with_bound.iter().filter(|&&b| b).count() as f64 / with_bound.len() as f64),
    }
}

fn tightness_results(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Value {
    let mut scatter = Vec::new();
    for est in &cfg.estimators {
        for (ki, kind) in cfg.matrix.iter().enumerate() {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.estimator == est.name() && r.matrix == kind.label())
                .collect();
            let _ = ki;
            scatter.push(json!({
                "estimator": est.name(),
                "matrix": kind.label(),
                "stats": scatter_stats(&rows),
            }));
        }
    }
    // √k scaling at fixed (matrix, n, s, lambda0)
    let mut k_curves = Vec::new();
    if cfg.k_list.len() >= 2 {
        for est in &cfg.estimators {
            for kind in &cfg.matrix {
                for &n in &cfg.n_list {
                    for &s in &cfg.s_list {
                        for &l0 in &cfg.lambda0 {
                            let mut ks = Vec::new();
                            let mut errs = Vec::new();
                            for &k in &cfg.k_list {
                                let e: Vec<f64> = records
                                    .iter()
                                    .filter(|r| {
                                        r.estimator == est.name()
                                            && r.matrix == kind.label()
                                            && r.n == n
                                            && r.s == s
                                            && r.lambda0 == l0
                                            && r.k == k
                                    })
                                    .filter_map(|r| r.l2_error)
                                    .collect();
                                if let Some(m) = mean(&e) {
                                    ks.push(k);
                                    errs.push(m);
                                }
                            }
                            let sqrt_k: Vec<f64> = ks.iter().map(|&k| (k as f64).sqrt()).collect();
                            k_curves.push(json!({
                                "estimator": est.name(),
                                "matrix": kind.label(),
                                "n": n,
                                "s": s,
                                "lambda0": l0,
                                "k": ks,
                                "mean_l2_error": errs,
                                "pearson_sqrt_k": pearson(&sqrt_k, &errs),
                            }));
                        }
                    }
                }
            }
        }
    }
    json!({ "scatter": scatter, "sqrt_k": k_curves })
}

// ---------------------------------------------------------------------------
// gauss-vs-poisson

fn run_estimators(cfg: &ExperimentConfig, cell: &Cell, trial: usize, keep_estimates: bool) -> Result<JobOutput, CliError> {
    let mut out = JobOutput::default();
    let inst = instance(cfg, cell, trial, trial)?;
    let cs = constraints(cfg, cell.s)?;
    let thresholds = cfg.thresholds_for(cell.k);
    for &est in &cfg.estimators {
        let ctx = || format!("cell {} trial {trial} {}", cell.idx, est.name());
        let res = fit(est, &inst.model, &inst.y, &cs, &cfg.solver).map_err(Into::into);
        let Some(res) = soft(res, ctx, &mut out.notes)? else { continue };
        let base = fit_record(&base_record(cfg, cell, trial, inst.seed, est.name()), &res, &inst.w_star)?;
        for &t in &thresholds {
            let m = eval::support_metrics(&res.w_hat, &inst.w_star, t)?;
            out.records.push(TrialRecord {
                threshold: Some(t),
                success: Some(u8::from(m.support_success)),
                detections: Some(m.detections),
                false_alarms: Some(m.false_alarms),
                ..base.clone()
            });
        }
        if keep_estimates {
            out.estimates.push((est, res.w_hat, inst.w_star.clone()));
        }
    }
    Ok(out)
}

fn run_gauss_vs_poisson(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let mut cfg_one = cfg.clone();
    // a single nominal threshold keeps one row per (trial, estimator)
    cfg_one.thresholds.truncate(1);
    let jobs = jobs(&cfg_one);
    let mut outs = run_jobs(&jobs, |(cell, trial)| run_estimators(&cfg_one, cell, *trial, false))?;
    let (records, notes) = flatten(&mut outs);

    let mut per_cell = Vec::new();
    for c in cells(cfg) {
        let err = |e: Estimator| -> BTreeMap<usize, f64> {
            records
                .iter()
                .filter(|r| r.cell == c.idx && r.estimator == e.name())
                .filter_map(|r| Some((r.trial, r.l2_error?)))
                .collect()
        };
        let (pm, gm) = (err(Estimator::PoissonMl), err(Estimator::GaussianMl));
        let paired: Vec<(f64, f64)> = pm.iter().filter_map(|(t, &p)| Some((p, *gm.get(t)?))).collect();
        if paired.is_empty() {
            continue;
        }
        let wins = paired.iter().filter(|(p, g)| p < g).count();
        let ratios: Vec<f64> = paired.iter().filter(|(p, _)| *p > 0.0).map(|(p, g)| g / p).collect();
        let mp = mean(&paired.iter().map(|x| x.0).collect::<Vec<_>>());
        let mg = mean(&paired.iter().map(|x| x.1).collect::<Vec<_>>());
        per_cell.push(json!({
            "cell": c.idx,
            "matrix": c.kind.label(),
            "n": c.n,
            "k": c.k,
            "s": c.s,
            "lambda0": c.lambda0,
            "trials": paired.len(),
            "poisson_better_fraction": wins as f64 / paired.len() as f64,
            "mean_ratio_gaussian_over_poisson": mean(&ratios),
            "ratio_of_mean_errors": mp.zip(mg).map(|(p, g)| g / p),
        }));
    }
    Ok(ExperimentOutput {
        records,
        roc: Vec::new(),
        results: json!({ "comparison": per_cell }),
        notes,
    })
}

// ---------------------------------------------------------------------------
// support recovery

fn success_rate(records: &[TrialRecord], cell: usize, est: Estimator, t_idx: usize, thresholds: &[f64]) -> Option<f64> {
    let t = thresholds.get(t_idx)?;
    let v: Vec<f64> = records
        .iter()
        .filter(|r| r.cell == cell && r.estimator == est.name() && r.threshold == Some(*t))
        .filter_map(|r| r.success.map(f64::from))
        .collect();
    mean(&v)
}

/// Smallest `n` whose success rate reaches `level`.
pub fn first_reaching(curve: &[(usize, f64)], level: f64) -> Option<usize> {
    curve.iter().find(|(_, r)| *r >= level).map(|(n, _)| *n)
}

fn run_support_vs_n(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let jobs = jobs(cfg);
    let mut outs = run_jobs(&jobs, |(cell, trial)| run_estimators(cfg, cell, *trial, false))?;
    let (records, notes) = flatten(&mut outs);
    let all = cells(cfg);
    let mut curves = Vec::new();
    let mut n90: BTreeMap<(usize, usize, usize, usize, usize), BTreeMap<Estimator, Option<usize>>> = BTreeMap::new();
    for (ki, kind) in cfg.matrix.iter().enumerate() {
        for (kk, &k) in cfg.k_list.iter().enumerate() {
            let thresholds = cfg.thresholds_for(k);
            for (si, &s) in cfg.s_list.iter().enumerate() {
                for (li, &l0) in cfg.lambda0.iter().enumerate() {
                    for (ti, &t) in thresholds.iter().enumerate() {
                        for &est in &cfg.estimators {
                            let mut curve: Vec<(usize, f64)> = all
                                .iter()
                                .filter(|c| c.kind_idx == ki && c.k_idx == kk && c.s_idx == si && c.l_idx == li)
                                .filter_map(|c| Some((c.n, success_rate(&records, c.idx, est, ti, &thresholds)?)))
                                .collect();
                            curve.sort_by_key(|x| x.0);
                            let first = first_reaching(&curve, 0.9);
                            n90.entry((ki, kk, si, li, ti)).or_default().insert(est, first);
                            curves.push(json!({
                                "estimator": est.name(),
                                "matrix": kind.label(),
                                "k": k,
                                "s": s,
                                "lambda0": l0,
                                "threshold": t,
                                "n": curve.iter().map(|x| x.0).collect::<Vec<_>>(),
                                "success_rate": curve.iter().map(|x| x.1).collect::<Vec<_>>(),
                                "n_at_0_9": first,
                            }));
                        }
                    }
                }
            }
        }
    }
    let ratios: Vec<Value> = n90
        .iter()
        .map(|(&(ki, kk, si, li, ti), m)| {
            let ml = m.get(&Estimator::PoissonMl).copied().flatten();
            let rl = m.get(&Estimator::RescaledLasso).copied().flatten();
            json!({
                "matrix": cfg.matrix[ki].label(),
                "k": cfg.k_list[kk],
                "s": cfg.s_list[si],
                "lambda0": cfg.lambda0[li],
                "threshold_index": ti,
                "poisson_ml_n_at_0_9": ml,
                "rescaled_lasso_n_at_0_9": rl,
                "ratio": ml.zip(rl).map(|(a, b)| a as f64 / b as f64),
            })
        })
        .collect();
    Ok(ExperimentOutput {
        records,
        roc: Vec::new(),
        results: json!({ "curves": curves, "n_at_0_9": ratios }),
        notes,
    })
}

fn run_support_vs_k(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let jobs = jobs(cfg);
    let mut outs = run_jobs(&jobs, |(cell, trial)| run_estimators(cfg, cell, *trial, false))?;
    let (records, notes) = flatten(&mut outs);
    let all = cells(cfg);
    let mut curves = Vec::new();
    for (ki, kind) in cfg.matrix.iter().enumerate() {
        for (ni, &n) in cfg.n_list.iter().enumerate() {
            for (si, &s) in cfg.s_list.iter().enumerate() {
                for (li, &l0) in cfg.lambda0.iter().enumerate() {
                    for ti in 0..cfg.thresholds.len() {
                        for &est in &cfg.estimators {
                            let curve: Vec<(usize, f64)> = all
                                .iter()
                                .filter(|c| c.kind_idx == ki && c.n_idx == ni && c.s_idx == si && c.l_idx == li)
                                .filter_map(|c| {
                                    Some((c.k, success_rate(&records, c.idx, est, ti, &cfg.thresholds_for(c.k))?))
                                })
                                .collect();
                            curves.push(json!({
                                "estimator": est.name(),
                                "matrix": kind.label(),
                                "n": n,
                                "s": s,
                                "lambda0": l0,
                                "threshold_index": ti,
                                "k": curve.iter().map(|x| x.0).collect::<Vec<_>>(),
                                "success_rate": curve.iter().map(|x| x.1).collect::<Vec<_>>(),
                            }));
                        }
                    }
                }
            }
        }
    }
    Ok(ExperimentOutput {
        records,
        roc: Vec::new(),
        results: json!({ "curves": curves }),
        notes,
    })
}

fn run_roc(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let jobs = jobs(cfg);
    let mut outs = run_jobs(&jobs, |(cell, trial)| run_estimators(cfg, cell, *trial, true))?;
    let mut by_cell: BTreeMap<(usize, Estimator), (Vec<ParamVector>, Vec<ParamVector>)> = BTreeMap::new();
    for ((cell, _), o) in jobs.iter().zip(outs.iter_mut()) {
        for (est, w_hat, w_star) in o.estimates.drain(..) {
            let e = by_cell.entry((cell.idx, est)).or_default();
            e.0.push(w_hat);
            e.1.push(w_star);
        }
    }
    let (records, notes) = flatten(&mut outs);
    let all = cells(cfg);
    let mut roc = Vec::new();
    let mut aucs = Vec::new();
    for ((cell_idx, est), (hats, stars)) in &by_cell {
        let c = &all[*cell_idx];
        let thresholds = cfg.thresholds_for(c.k);
        let pts = eval::roc_curve(hats, stars, &thresholds)?;
        aucs.push(json!({
            "cell": c.idx,
            "matrix": c.kind.label(),
            "n": c.n,
            "k": c.k,
            "s": c.s,
            "lambda0": c.lambda0,
            "estimator": est.name(),
            "trials": hats.len(),
            "auc": eval::auc(&pts),
        }));
        roc.extend(pts.into_iter().map(|pt| RocRow {
            cell: c.idx,
            matrix: c.kind.label(),
            n: c.n,
            p: cfg.p,
            k: c.k,
            s: c.s,
            lambda0: c.lambda0,
            estimator: est.name().into(),
            threshold: pt.threshold,
            pd: pt.pd,
            pf: pt.pf,
        }));
    }
    Ok(ExperimentOutput {
        records,
        roc,
        results: json!({ "auc": aucs }),
        notes,
    })
}

// ---------------------------------------------------------------------------
// bounds-report

fn metric(base: &TrialRecord, name: &str, value: f64) -> TrialRecord {
    TrialRecord {
        metric: Some(name.into()),
        value: Some(value),
        ..base.clone()
    }
}

fn run_bounds_report(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let jobs = jobs(cfg);
    let reports: Vec<(JobOutput, Value)> = jobs
        .par_iter()
        .map(|(cell, trial)| -> Result<(JobOutput, Value), CliError> {
            let mut out = JobOutput::default();
            let a = design(cfg, cell, *trial)?;
            let model = AffineRateModel::with_constant_base(cell.lambda0, a)?;
            let (w, sd) = signal(cfg, cell, *trial)?;
            let ctx = || format!("cell {} trial {trial}", cell.idx);
            let Some(summary) = soft(model.rate_summary(&w).map_err(Into::into), ctx, &mut out.notes)? else {
                return Ok((out, Value::Null));
            };
            let gamma = re_estimate(cfg, cell, model.matrix(), *trial)?;
            let base = TrialRecord {
                lambda_h: Some(summary.lambda_harmonic),
                gamma_hat: Some(gamma),
                ..base_record(cfg, cell, *trial, sd, "-")
            };
            out.records.push(metric(&base, "gamma_hat", gamma));
            out.records.push(metric(&base, "lambda_h", summary.lambda_harmonic));

            let inp = BoundInputs::from_summary(&summary, gamma, cell.k, cell.n, cfg.zeta);
            let fano = soft(
                bounds::fano_lower_bound(
                    &model,
                    cell.s,
                    cell.k,
                    &cfg.fano,
                    seed(cfg, TAG_FANO, &[cell.idx as u64, *trial as u64]),
                )
                .map_err(Into::into),
                || format!("{} lower bound", ctx()),
                &mut out.notes,
            )?;
            let report = soft(
                bounds::bound_report(&inp, fano.as_ref().map(|f| f.bound)).map_err(Into::into),
                || format!("{} upper bound", ctx()),
                &mut out.notes,
            )?;
            if let Some(r) = &report {
                for (name, v) in [
                    ("kappa", r.kappa),
                    ("tau", r.tau),
                    ("nu_n", r.nu_n),
                    ("delta", r.delta),
                    ("theorem1_bound", r.theorem1_value),
                    ("zeta_floor", r.zeta_floor),
                ] {
                    out.records.push(metric(&base, name, v));
                }
                out.notes.extend(r.warnings.iter().map(|w| format!("{}: {w}", ctx())));
            }
            if let Some(f) = &fano {
                out.records.push(metric(&base, "fano_bound", f.bound));
                out.records.push(metric(&base, "fano_mutual_info", f.diagnostics.mutual_info));
                out.records.push(metric(&base, "fano_ratio", f.diagnostics.fano_ratio));
            }
            let curvature = bounds::strong_convexity_diagnostic(
                &model,
                &w,
                gamma,
                cfg.re_trials,
                seed(cfg, TAG_CURVATURE, &[cell.idx as u64, *trial as u64]),
            )?;
            out.records.push(metric(&base, "curvature_min_margin", curvature.min_margin));
            let value = json!({
                "cell": cell.idx,
                "trial": trial,
                "matrix": cell.kind.label(),
                "n": cell.n,
                "k": cell.k,
                "s": cell.s,
                "lambda0": cell.lambda0,
                "rate_summary": summary,
                "gamma_hat": gamma,
                "report": report,
                "fano": fano,
                "curvature": curvature,
            });
            Ok((out, value))
        })
        .collect::<Result<_, _>>()?;
    let mut outs = Vec::new();
    let mut values = Vec::new();
    for (o, v) in reports {
        outs.push(o);
        if !v.is_null() {
            values.push(v);
        }
    }
    let (records, notes) = flatten(&mut outs);
    Ok(ExperimentOutput {
        records,
        roc: Vec::new(),
        results: json!({ "instances": values }),
        notes,
    })
}

// ---------------------------------------------------------------------------
// bernstein-check

fn run_bernstein(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let all = cells(cfg);
    let mut records = Vec::new();
    let mut notes = Vec::new();
    let mut values = Vec::new();
    // trials are parallel inside the coverage routine
    for cell in &all {
        let a = design(cfg, cell, 0)?;
        let model = AffineRateModel::with_constant_base(cell.lambda0, a)?;
        let (w, _) = signal(cfg, cell, 0)?;
        let sd = seed(cfg, TAG_BERNSTEIN, &[cell.idx as u64]);
        let ctx = || format!("cell {}", cell.idx);
        let Some(rep) = soft(
            bounds::bernstein_coverage(&model, &w, cfg.zeta, cfg.trials, sd).map_err(Into::into),
            ctx,
            &mut notes,
        )?
        else {
            continue;
        };
        notes.extend(rep.warnings.iter().map(|m| format!("{}: {m}", ctx())));
        let base = TrialRecord {
            lambda_h: Some(rep.lambda_harmonic),
            ..base_record(cfg, cell, 0, sd, "-")
        };
        records.push(metric(&base, "coverage", rep.frequency));
        records.push(metric(&base, "coverage_per_term", rep.frequency_per_term));
        values.push(json!({
            "cell": cell.idx,
            "matrix": cell.kind.label(),
            "n": cell.n,
            "k": cell.k,
            "s": cell.s,
            "lambda0": cell.lambda0,
            "coverage": rep,
        }));
    }
    Ok(ExperimentOutput {
        records,
        roc: Vec::new(),
        results: json!({ "coverage": values }),
        notes,
    })
}

// ---------------------------------------------------------------------------
// model-comparison

fn run_model_comparison(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let jobs = jobs(cfg);
    let mut outs = run_jobs(&jobs, |(cell, trial)| {
        let mut out = JobOutput::default();
        let inst = instance(cfg, cell, *trial, *trial)?;
        let cs = constraints(cfg, cell.s)?;
        let ctx = || format!("cell {} trial {trial}", cell.idx);
        let pair = |model: &AffineRateModel, y: &ObservationSet, notes: &mut Vec<String>| {
            let ml = soft(fit(Estimator::PoissonMl, model, y, &cs, &cfg.solver).map_err(Into::into), ctx, notes)?;
            let ls = soft(fit(Estimator::RescaledLasso, model, y, &cs, &cfg.solver).map_err(Into::into), ctx, notes)?;
            Ok::<_, CliError>(ml.zip(ls))
        };

        // Bayes factor on all data, by sparsity of the thresholded fits
        if let Some((ml, ls)) = pair(&inst.model, &inst.y, &mut out.notes)? {
            let base = base_record(cfg, cell, *trial, inst.seed, "-");
            for level in 1..=(2 * cell.k).min(cfg.p) {
                let bf = eval::bayes_factor(
                    &inst.y,
                    &inst.model,
                    &solver::keep_largest(&ml.w_hat, level),
                    &solver::keep_largest(&ls.w_hat, level),
                )
                .map_err(Into::into);
                if let Some(bf) = soft(bf, || format!("{} level {level}", ctx()), &mut out.notes)? {
                    out.records.push(TrialRecord {
                        sparsity_level: Some(level),
                        ..metric(&base, "log_bayes_factor", bf.log_bf)
                    });
                }
            }
        }

        // held-out log-likelihood on the rows after the training split
        let n_train = ((cfg.train_fraction * cell.n as f64).round() as usize).clamp(1, cell.n.saturating_sub(1).max(1));
        if n_train < cell.n {
            let train: Vec<usize> = (0..n_train).collect();
            let test: Vec<usize> = (n_train..cell.n).collect();
            let (m_train, y_train) = (inst.model.select_rows(&train), inst.y.select(&train));
            let (m_test, y_test) = (inst.model.select_rows(&test), inst.y.select(&test));
            if let Some((ml, ls)) = pair(&m_train, &y_train, &mut out.notes)? {
                for (est, res, family) in [
                    (Estimator::PoissonMl, &ml, Family::PoissonMl),
                    (Estimator::RescaledLasso, &ls, Family::DiscretizedGaussian),
                ] {
                    let base = fit_record(&base_record(cfg, cell, *trial, inst.seed, est.name()), res, &inst.w_star)?;
                    let ll = eval::heldout_loglik(&y_test, &m_test, &res.w_hat, family).map_err(Into::into);
                    if let Some(ll) = soft(ll, ctx, &mut out.notes)? {
                        out.records.push(metric(&base, "heldout_loglik", ll));
                    }
                }
            }
        }
        Ok(out)
    })?;
    let (records, notes) = flatten(&mut outs);

    let mut per_cell = Vec::new();
    for c in cells(cfg) {
        let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.cell == c.idx).collect();
        let mut by_level: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.metric.as_deref() == Some("log_bayes_factor")) {
            by_level.entry(r.sparsity_level.unwrap_or(0)).or_default().extend(r.value);
        }
        let heldout = |est: Estimator| -> BTreeMap<usize, f64> {
            rows.iter()
                .filter(|r| r.metric.as_deref() == Some("heldout_loglik") && r.estimator == est.name())
                .filter_map(|r| Some((r.trial, r.value?)))
                .collect()
        };
        let (hm, hl) = (heldout(Estimator::PoissonMl), heldout(Estimator::RescaledLasso));
        let paired: Vec<(f64, f64)> = hm.iter().filter_map(|(t, &a)| Some((a, *hl.get(t)?))).collect();
        per_cell.push(json!({
            "cell": c.idx,
            "matrix": c.kind.label(),
            "n": c.n,
            "k": c.k,
            "s": c.s,
            "lambda0": c.lambda0,
            "sparsity_level": by_level.keys().collect::<Vec<_>>(),
            "mean_log_bayes_factor": by_level.values().map(|v| mean(v)).collect::<Vec<_>>(),
            "mean_heldout_poisson_ml": mean(&paired.iter().map(|x| x.0).collect::<Vec<_>>()),
            "mean_heldout_rescaled_lasso": mean(&paired.iter().map(|x| x.1).collect::<Vec<_>>()),
            "poisson_heldout_better_fraction": (!paired.is_empty())
                .then(|| paired.iter().filter(|(a, b)| a > b).count() as f64 / paired.len() as f64),
        }));
    }
    Ok(ExperimentOutput {
        records,
        roc: Vec::new(),
        results: json!({ "comparison": per_cell }),
        notes,
    })
}
