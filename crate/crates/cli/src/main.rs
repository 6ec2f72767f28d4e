use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use poisson_sparse::bounds::{self, FanoConfig};
use poisson_sparse::sensing;
use poisson_sparse::solver::{self, ConstraintMode};
use poisson_sparse::{AffineRateModel, BoundInputs, ConstraintSet, Loss, ObservationSet, ParamVector, SolverConfig};
use poisson_sparse_cli::error::exit;
use poisson_sparse_cli::{list_experiments, run_config_file, CliError};

/// Sparse Poisson recovery experiments and utilities.
#[derive(Parser)]
#[command(name = "poisson-sparse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run { config: PathBuf },
    /// List registered experiments.
    List,
    /// Error bounds for a model file `{"base_rates": [...], "matrix": [[...]]}`.
    Bounds {
        model: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 0.1)]
        zeta: f64,
        /// Restricted-eigenvalue constant; estimated from the design when absent.
        #[arg(long)]
        gamma_k: Option<f64>,
        /// Samples per sparsity level for the restricted-eigenvalue estimate.
        #[arg(long, default_value_t = 200)]
        re_trials: usize,
        /// True parameter (CSV); without it the rates at w = 0 stand in for λ(w*).
        #[arg(long)]
        w_star: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Fit one estimator to a model file and a count vector.
    Solve {
        model: PathBuf,
        /// Counts separated by commas or newlines.
        counts: PathBuf,
        #[arg(long, value_enum, default_value_t = LossArg::Poisson)]
        loss: LossArg,
        #[arg(long)]
        s: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Le)]
        mode: ModeArg,
        #[arg(long)]
        obj_tol: Option<f64>,
        #[arg(long)]
        step_tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Poisson,
    Rlasso,
    Ls,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Le,
    Eq,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_model(path: &Path) -> Result<AffineRateModel, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_vector(path: &Path) -> Result<ParamVector, CliError> {
    let values = read_text(path)?
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| CliError::Usage(format!("bad value {t:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ParamVector::new(values)?)
}

fn list() {
    for e in list_experiments() {
        println!("{:<18} {}", e.name, e.about);
    }
}

#[allow(clippy::too_many_arguments)]
fn bounds_cmd(
    model: &Path,
    k: usize,
    s: f64,
    zeta: f64,
    gamma_k: Option<f64>,
    re_trials: usize,
    w_star: Option<&Path>,
    seed: u64,
    as_json: bool,
) -> Result<(), CliError> {
    let model = read_model(model)?;
    let w = match w_star {
        Some(p) => read_vector(p)?,
        None => ParamVector::zeros(model.p()),
    };
    let mut summary = model.rate_summary(&w)?;
    if w_star.is_none() {
        eprintln!("note: no --w-star given; rates at w = 0 stand in for the true rates, lambda_max uses max base rate + a_max * s");
        summary.lambda_max = summary.lambda_max.max(model.base_rates().iter().copied().fold(0.0, f64::max) + summary.a_max * s);
    }
    let gamma = match gamma_k {
        Some(g) => g,
        None => sensing::estimate_re(model.matrix(), k, re_trials, seed)?.gamma_hat,
    };
    let inp = BoundInputs::from_summary(&summary, gamma, k, model.n(), zeta);
    let fano = bounds::fano_lower_bound(&model, s, k, &FanoConfig::default(), seed);
    let fano_value = fano.as_ref().ok().map(|f| f.bound);
    let report = bounds::bound_report(&inp, fano_value)?;
    if as_json {
        let v = serde_json::json!({
            "inputs": inp,
            "report": report,
            "fano": fano.as_ref().ok(),
            "fano_error": fano.as_ref().err().map(ToString::to_string),
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    let rows: [(&str, f64); 11] = [
        ("lambda_min", summary.lambda_min),
        ("lambda_max", summary.lambda_max),
        ("lambda_h", summary.lambda_harmonic),
        ("a_max", summary.a_max),
        ("gamma_k", gamma),
        ("kappa", report.kappa),
        ("tau", report.tau),
        ("nu_n", report.nu_n),
        ("delta", report.delta),
        ("theorem1_bound", report.theorem1_value),
        ("zeta_floor", report.zeta_floor),
    ];
    for (name, v) in rows {
        println!("{name}: {v}");
    }
    match &fano {
        Ok(f) => println!("fano_bound: {}", f.bound),
        Err(e) => println!("fano_bound: unavailable ({e})"),
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve_cmd(
    model: &Path,
    counts: &Path,
    loss: LossArg,
    s: f64,
    mode: ModeArg,
    obj_tol: Option<f64>,
    step_tol: Option<f64>,
    max_iters: Option<usize>,
) -> Result<(), CliError> {
    let model = read_model(model)?;
    let y = ObservationSet::parse(&read_text(counts)?)?;
    let mode = match mode {
        ModeArg::Le => ConstraintMode::SumAtMost,
        ModeArg::Eq => ConstraintMode::SumEquals,
    };
    let loss = match loss {
        LossArg::Poisson => Loss::PoissonNll,
        LossArg::Rlasso => Loss::RescaledLasso,
        LossArg::Ls => Loss::LeastSquares,
    };
    let d = SolverConfig::default();
    let config = SolverConfig {
        obj_tol: obj_tol.unwrap_or(d.obj_tol),
        step_tol: step_tol.unwrap_or(d.step_tol),
        max_iters: max_iters.unwrap_or(d.max_iters),
        ..d
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cs = ConstraintSet::new(s, mode).map_err(|e| CliError::Usage(e.to_string()))?;
    let res = solver::minimize(loss, &model, &y, &cs, &config, None)?;
    println!("{}", serde_json::to_string_pretty(&res)?);
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("POISSON_SPARSE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("POISSON_SPARSE_THREADS={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run { config } => {
            let manifest = run_config_file(&config)?;
            for n in &manifest.summary.notes {
                eprintln!("note: {n}");
            }
            for f in &manifest.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::List => {
            list();
            Ok(())
        }
        Command::Bounds { model, k, s, zeta, gamma_k, re_trials, w_star, seed, json } => {
            bounds_cmd(&model, k, s, zeta, gamma_k, re_trials, w_star.as_deref(), seed, json)
        }
        Command::Solve { model, counts, loss, s, mode, obj_tol, step_tol, max_iters } => {
            solve_cmd(&model, &counts, loss, s, mode, obj_tol, step_tol, max_iters)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
