//! Sparse nonnegative signal recovery from heterogeneous Poisson counts.
//!
//! Observations follow `y_i ~ Poisson(λ0_i + a_iᵀ w*)` with `w* ≥ 0`,
//! `‖w*‖₁ = s` and `‖w*‖₀ = k`. The crate provides
//!
//! * the observation model and its losses ([`model`]),
//! * random sensing designs and restricted-eigenvalue diagnostics ([`sensing`]),
//! * ground-truth and count generation ([`simulate`]),
//! * a projected-gradient solver over `{w ≥ 0, Σw ≤ s}` / `{w ≥ 0, Σw = s}` ([`solver`]),
//! * upper/lower error bounds and their Monte Carlo checks ([`bounds`]),
//! * recovery metrics, ROC and likelihood-based model comparison ([`eval`]).
//!
//! The numeric core (matrices, losses, projections, solver, closed-form
//! bounds) is generic over [`Scalar`]; aliases for `f64` (and a few `f32`
//! ones) are re-exported here. Monte Carlo code works in `f64`.

pub mod bounds;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod sensing;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense row-major `f64` matrix.
pub type Matrix = matrix::Matrix<f64>;
/// Affine-rate Poisson model in `f64`.
pub type AffineRateModel = model::RateModel<f64>;
/// Nonnegative parameter vector in `f64`.
pub type ParamVector = model::ParamVector<f64>;
pub type RateSummary = model::RateSummary<f64>;
pub type ConstraintSet = solver::ConstraintSet<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type SolveResult = solver::SolveResult<f64>;
pub type BoundInputs = bounds::BoundInputs<f64>;

/// Single-precision variants, mostly useful for memory-bound sweeps.
pub type AffineRateModel32 = model::RateModel<f32>;
pub type ParamVector32 = model::ParamVector<f32>;
pub type SolverConfig32 = solver::SolverConfig<f32>;

pub use model::{Loss, ObservationSet};
