//! Constrained first-order minimization over `{w ≥ 0, Σw ≤ s}` and
//! `{w ≥ 0, Σw = s}`.
//!
//! The method is projected gradient with a monotone Armijo backtracking
//! search along the projected direction `d = P(w − α∇f) − w`. Trial points
//! whose rates fall at or below the floor are rejected like any failed
//! Armijo test. The scale `α` comes from a Barzilai–Borwein estimate or from
//! a doubling rule.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{check_positive, Loss, ObservationSet, ParamVector, RateModel, RATE_FLOOR};
use crate::scalar::{dot, norm2, Scalar};

/// Euclidean projection onto `{w ≥ 0, Σw = s}` (sort-and-threshold).
pub fn project_simplex<T: Scalar>(v: &[T], s: T) -> Vec<T> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cumsum = cumsum + uj;
        let t = (cumsum - s) / T::from_usize(j + 1).expect("index");
        if uj - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

/// Euclidean projection onto `{w ≥ 0, Σw ≤ s}`.
pub fn project_nonneg_l1<T: Scalar>(v: &[T], s: T) -> Vec<T> {
    let clipped: Vec<T> = v.iter().map(|&x| x.max(T::zero())).collect();
    if clipped.iter().copied().sum::<T>() <= s {
        clipped
    } else {
        project_simplex(v, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintMode {
    /// `Σw ≤ s`
    #[serde(rename = "le")]
    SumAtMost,
    /// `Σw = s`
    #[serde(rename = "eq")]
    SumEquals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConstraintSet<T: Scalar> {
    pub amplitude: T,
    pub mode: ConstraintMode,
    pub rate_floor: T,
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn new(amplitude: T, mode: ConstraintMode) -> Result<Self> {
        let c = Self {
            amplitude,
            mode,
            rate_floor: T::lit(RATE_FLOOR),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn at_most(amplitude: T) -> Result<Self> {
        Self::new(amplitude, ConstraintMode::SumAtMost)
    }

    pub fn equal_to(amplitude: T) -> Result<Self> {
        Self::new(amplitude, ConstraintMode::SumEquals)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > T::zero() && self.amplitude.is_finite()) {
            return Err(Error::Config(format!("amplitude {} must be positive", self.amplitude)));
        }
        if !(self.rate_floor > T::zero()) {
            return Err(Error::Config("rate floor must be positive".into()));
        }
        Ok(())
    }

    pub fn project(&self, v: &[T]) -> Vec<T> {
        match self.mode {
            ConstraintMode::SumAtMost => project_nonneg_l1(v, self.amplitude),
            ConstraintMode::SumEquals => project_simplex(v, self.amplitude),
        }
    }

    /// Membership test with relative tolerance `tol` on the sum.
    pub fn contains(&self, w: &[T], tol: T) -> bool {
        if w.iter().any(|&x| x < T::zero()) {
            return false;
        }
        let sum: T = w.iter().copied().sum();
        let slack = tol * self.amplitude.max(T::one());
        match self.mode {
            ConstraintMode::SumAtMost => sum <= self.amplitude + slack,
            ConstraintMode::SumEquals => (sum - self.amplitude).abs() <= slack,
        }
    }

    /// `s/p` in every coordinate.
    pub fn center(&self, p: usize) -> Vec<T> {
        vec![self.amplitude / T::from_usize(p.max(1)).expect("p"); p]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Safeguarded Barzilai–Borwein scale `sᵀs / sᵀy`.
    BarzilaiBorwein,
    /// Double after an unshortened step, shrink to the accepted fraction otherwise.
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverConfig<T: Scalar> {
    /// Relative tolerance on the per-iteration objective decrease.
    pub obj_tol: T,
    /// Relative tolerance on the proposed step norm.
    pub step_tol: T,
    pub max_iters: usize,
    pub armijo_c: T,
    pub backtrack_ratio: T,
    pub initial_step: T,
    pub step_rule: StepRule,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            obj_tol: T::lit(1e-10),
            step_tol: T::lit(1e-10),
            max_iters: 50_000,
            armijo_c: T::lit(1e-4),
            backtrack_ratio: T::lit(0.5),
            initial_step: T::one(),
            step_rule: StepRule::BarzilaiBorwein,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero() && x.is_finite();
        if !(pos(self.obj_tol) && pos(self.step_tol) && pos(self.initial_step)) {
            return Err(Error::Config("tolerances and initial step must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(pos(self.armijo_c) && self.armijo_c < T::one()) {
            return Err(Error::Config("armijo_c must lie in (0, 1)".into()));
        }
        if !(pos(self.backtrack_ratio) && self.backtrack_ratio < T::one()) {
            return Err(Error::Config("backtrack_ratio must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Objective decrease and step norm both under tolerance.
    Converged,
    /// The projected direction vanished: first-order stationary point.
    Stationary,
    /// No step passed the line search; the predicted decrease was negligible.
    LineSearchStalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolveResult<T: Scalar> {
    pub w_hat: ParamVector<T>,
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

/// Bounds on the Barzilai–Borwein scale.
const BB_MIN: f64 = 1e-30;
const BB_MAX: f64 = 1e30;
const MAX_BACKTRACKS: usize = 200;
/// Rates are updated by interpolation; refresh them from `w` this often.
const RATE_REFRESH: usize = 64;

struct Workspace<'a, T: Scalar> {
    loss: Loss,
    model: &'a RateModel<T>,
    y: &'a [u64],
    floor: T,
    deriv: Vec<T>,
}

impl<T: Scalar> Workspace<'_, T> {
    fn value(&self, rates: &[T]) -> Option<T> {
        if self.loss.needs_positive_rates() && check_positive(rates, self.floor).is_err() {
            return None;
        }
        self.loss
            .value_from_rates(rates, self.y, self.floor)
            .ok()
            .filter(|v| v.is_finite())
    }

    fn gradient(&mut self, rates: &[T], out: &mut [T]) {
        self.loss.rate_derivative(rates, self.y, &mut self.deriv);
        self.model.matrix().tmul_vec_into(&self.deriv, out);
    }

    fn rates_into(&self, w: &[T], out: &mut [T]) {
        self.model.matrix().mul_vec_into(w, out);
        for (o, &b) in out.iter_mut().zip(self.model.base_rates()) {
            *o = *o + b;
        }
    }
}

/// Minimizes `loss` over the constraint set starting from `w0` (default:
/// `s/p` in every coordinate).
pub fn minimize<T: Scalar>(
    loss: Loss,
    model: &RateModel<T>,
    y: &ObservationSet,
    constraints: &ConstraintSet<T>,
    config: &SolverConfig<T>,
    w0: Option<&ParamVector<T>>,
) -> Result<SolveResult<T>> {
    config.validate()?;
    constraints.validate()?;
    check_len("observations vs model rows", model.n(), y.len())?;
    let p = model.p();
    let n = model.n();
    let mut w = match w0 {
        Some(w0) => {
            check_len("initial point", p, w0.len())?;
            if !constraints.contains(w0.as_slice(), T::lit(1e-9)) {
                return Err(Error::Contract(format!(
                    "initial point (sum {}) is outside the constraint set",
                    w0.l1()
                )));
            }
            w0.as_slice().to_vec()
        }
        None => constraints.center(p),
    };

    let mut ws = Workspace {
        loss,
        model,
        y: y.counts(),
        floor: constraints.rate_floor,
        deriv: vec![T::zero(); n],
    };
    let mut rates = vec![T::zero(); n];
    ws.rates_into(&w, &mut rates);
    if loss.needs_positive_rates() {
        check_positive(&rates, constraints.rate_floor)?;
    }
    let mut f = loss.value_from_rates(&rates, ws.y, constraints.rate_floor)?;
    if !f.is_finite() {
        return Err(Error::Domain(format!("objective {f} at the starting point is not finite")));
    }
    let mut grad = vec![T::zero(); p];
    ws.gradient(&rates, &mut grad);

    let mut alpha = config.initial_step;
    let mut trial = vec![T::zero(); p];
    let mut dir = vec![T::zero(); p];
    let mut rates_z = vec![T::zero(); n];
    let mut cand = vec![T::zero(); n];
    let mut grad_new = vec![T::zero(); p];

    let one = T::one();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        for ((t, &wi), &gi) in trial.iter_mut().zip(&w).zip(&grad) {
            *t = wi - alpha * gi;
        }
        let z = constraints.project(&trial);
        for ((d, &zi), &wi) in dir.iter_mut().zip(&z).zip(&w) {
            *d = zi - wi;
        }
        let dnorm = norm2(&dir);
        let slope = dot(&grad, &dir);
        if dnorm == T::zero() || !(slope < T::zero()) {
            termination = Termination::Stationary;
            break;
        }
        ws.rates_into(&z, &mut rates_z);

        // Armijo backtracking on the segment w + t d.
        let mut t = one;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for ((c, &r), &rz) in cand.iter_mut().zip(&rates).zip(&rates_z) {
                *c = (one - t) * r + t * rz;
            }
            if let Some(fc) = ws.value(&cand) {
                if fc <= f + config.armijo_c * t * slope {
                    accepted = Some(fc);
                    break;
                }
            }
            t = t * config.backtrack_ratio;
            if t * dnorm <= T::epsilon() * (one + norm2(&w)) {
                break;
            }
        }
        let Some(f_new) = accepted else {
            termination = Termination::LineSearchStalled;
            break;
        };

        let mut step_sq = T::zero();
        for (wi, &di) in w.iter_mut().zip(&dir) {
            let next = (*wi + t * di).max(T::zero());
            step_sq = step_sq + (next - *wi) * (next - *wi);
            *wi = next;
        }
        if iterations % RATE_REFRESH == 0 {
            ws.rates_into(&w, &mut rates);
        } else {
            rates.copy_from_slice(&cand);
        }
        ws.gradient(&rates, &mut grad_new);

        alpha = match config.step_rule {
            StepRule::BarzilaiBorwein => {
                let mut sy = T::zero();
                for ((&gn, &go), &di) in grad_new.iter().zip(&grad).zip(&dir) {
                    sy = sy + t * di * (gn - go);
                }
                if sy > T::zero() {
                    (step_sq / sy).max(T::lit(BB_MIN)).min(T::lit(BB_MAX))
                } else {
                    (alpha * T::lit(2.0)).min(T::lit(BB_MAX))
                }
            }
            StepRule::Doubling => {
                if t == one {
                    alpha * T::lit(2.0)
                } else {
                    alpha * t
                }
            }
        };

        let decrease = f - f_new;
        f = f_new;
        std::mem::swap(&mut grad, &mut grad_new);
        let scale_f = f.abs().max(one);
        let scale_w = norm2(&w).max(one);
        if decrease <= config.obj_tol * scale_f && dnorm <= config.step_tol * scale_w {
            termination = Termination::Converged;
            break;
        }
    }

    // Final exact evaluation (rates were interpolated).
    ws.rates_into(&w, &mut rates);
    let objective = match ws.value(&rates) {
        Some(v) => v,
        None => loss.value_from_rates(&rates, ws.y, constraints.rate_floor)?,
    };
    if termination == Termination::LineSearchStalled {
        // Armijo fails at the rounding floor of the objective; call that
        // converged when the first-order model predicts a negligible gain.
        let z = constraints.project(
            &w.iter().zip(&grad).map(|(&wi, &gi)| wi - alpha * gi).collect::<Vec<_>>(),
        );
        let slope: T = grad.iter().zip(z.iter().zip(&w)).map(|(&g, (&zi, &wi))| g * (zi - wi)).sum();
        let converged = slope.abs() <= config.obj_tol * objective.abs().max(one);
        return Ok(SolveResult {
            w_hat: ParamVector::from_projected(w),
            objective,
            iterations,
            converged,
            termination,
        });
    }
    Ok(SolveResult {
        w_hat: ParamVector::from_projected(w),
        objective,
        iterations,
        converged: matches!(termination, Termination::Converged | Termination::Stationary),
        termination,
    })
}

/// Rescaled LASSO started from the least-squares solution. Falls back to the
/// default start if the least-squares point has a nonpositive rate.
pub fn minimize_rescaled_lasso_warm<T: Scalar>(
    model: &RateModel<T>,
    y: &ObservationSet,
    constraints: &ConstraintSet<T>,
    config: &SolverConfig<T>,
) -> Result<SolveResult<T>> {
    let ls = minimize(Loss::LeastSquares, model, y, constraints, config, None)?;
    let rates = model.rates(ls.w_hat.as_slice())?;
    let start = check_positive(&rates, constraints.rate_floor).ok().map(|_| &ls.w_hat);
    minimize(Loss::RescaledLasso, model, y, constraints, config, start)
}

/// Indices with `w_i > t` (strict).
pub fn threshold_support<T: Scalar>(w: &ParamVector<T>, t: T) -> Vec<usize> {
    w.as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > t)
        .map(|(i, _)| i)
        .collect()
}

/// Zeroes entries at or below `t`.
pub fn threshold<T: Scalar>(w: &ParamVector<T>, t: T) -> ParamVector<T> {
    ParamVector::from_projected(
        w.as_slice()
            .iter()
            .map(|&x| if x > t { x } else { T::zero() })
            .collect(),
    )
}

/// Keeps the `k` largest entries (ties broken by lower index) and zeroes the rest.
pub fn keep_largest<T: Scalar>(w: &ParamVector<T>, k: usize) -> ParamVector<T> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    let v = w.as_slice();
    idx.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).expect("finite").then(a.cmp(&b)));
    let mut out = vec![T::zero(); w.len()];
    for &i in idx.iter().take(k) {
        out[i] = v[i];
    }
    ParamVector::from_projected(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn l1_projection_examples() {
        assert!(close(&project_nonneg_l1(&[0.5, 0.3], 1.0), &[0.5, 0.3], 1e-15));
        assert!(close(&project_nonneg_l1(&[2.0, 0.0], 1.0), &[1.0, 0.0], 1e-15));
        assert!(close(&project_nonneg_l1(&[1.0, 1.0], 1.0), &[0.5, 0.5], 1e-15));
        assert!(close(&project_nonneg_l1(&[-1.0, 0.2], 1.0), &[0.0, 0.2], 1e-15));
    }

    #[test]
    fn simplex_projection_examples() {
        assert!(close(&project_simplex(&[1.0, 0.0], 1.0), &[1.0, 0.0], 1e-15));
        assert!(close(&project_simplex(&[0.0, 0.0], 1.0), &[0.5, 0.5], 1e-15));
        assert!(close(&project_simplex(&[3.0, 1.0], 2.0), &[2.0, 0.0], 1e-15));
        // raises a point inside the ball up to the face
        assert!(close(&project_simplex(&[0.1, 0.1], 1.0), &[0.5, 0.5], 1e-15));
    }

    #[test]
    fn threshold_examples() {
        let w = ParamVector::new(vec![0.5, 1e-6]).unwrap();
        assert_eq!(threshold_support(&w, 1e-4), vec![0]);
        let w = ParamVector::new(vec![0.0, 0.3, 0.0, 2.0]).unwrap();
        assert_eq!(threshold_support(&w, 0.0), w.support());
        let w = ParamVector::new(vec![0.1, 0.1]).unwrap();
        assert!(threshold_support(&w, 0.1).is_empty());
        let w = ParamVector::new(vec![0.3, 0.1, 0.3, 0.2]).unwrap();
        assert_eq!(keep_largest(&w, 2).as_slice(), &[0.3, 0.0, 0.3, 0.0]);
    }

    fn scalar_model() -> (RateModel<f64>, ObservationSet) {
        (
            RateModel::new(vec![1.0], Matrix::from_rows(vec![vec![1.0]]).unwrap()).unwrap(),
            ObservationSet::new(vec![3]),
        )
    }

    /// Minimizer of a 1-D function on [0, s] by a fine grid and local zoom.
    fn grid_min_1d(f: impl Fn(f64) -> f64, s: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, s);
        for _ in 0..6 {
            let h = (hi - lo) / 1000.0;
            let best = (0..=1000)
                .map(|i| lo + i as f64 * h)
                .min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
                .unwrap();
            lo = (best - h).max(0.0);
            hi = (best + h).min(s);
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn one_dimensional_poisson_and_rlasso() {
        let (m, y) = scalar_model();
        let c = ConstraintSet::at_most(10.0).unwrap();
        let cfg = SolverConfig::default();
        let oracle_p = grid_min_1d(|w| -3.0 * (1.0 + w).ln() + 1.0 + w, 10.0);
        let oracle_r = grid_min_1d(|w| (2.0 - w).powi(2) / (1.0 + w), 10.0);
        assert!((oracle_p - 2.0).abs() < 1e-6 && (oracle_r - 2.0).abs() < 1e-6);

        let r = minimize(Loss::PoissonNll, &m, &y, &c, &cfg, None).unwrap();
        assert!((r.w_hat.as_slice()[0] - oracle_p).abs() < 1e-6, "{r:?}");
        assert!(r.converged);
        let r = minimize(Loss::RescaledLasso, &m, &y, &c, &cfg, None).unwrap();
        assert!((r.w_hat.as_slice()[0] - oracle_r).abs() < 1e-6, "{r:?}");
        let r = minimize_rescaled_lasso_warm(&m, &y, &c, &cfg).unwrap();
        assert!((r.w_hat.as_slice()[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn doubling_rule_reaches_same_point() {
        let (m, y) = scalar_model();
        let c = ConstraintSet::at_most(10.0).unwrap();
        let cfg = SolverConfig {
            step_rule: StepRule::Doubling,
            ..SolverConfig::default()
        };
        let r = minimize(Loss::PoissonNll, &m, &y, &c, &cfg, None).unwrap();
        assert!((r.w_hat.as_slice()[0] - 2.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn least_squares_beats_truth_objective() {
        let a = Matrix::from_rows(vec![
            vec![1.0, 0.5, 0.0],
            vec![0.2, 1.0, 0.3],
            vec![0.0, 0.4, 1.0],
            vec![0.7, 0.1, 0.6],
        ])
        .unwrap();
        let m = RateModel::<f64>::with_constant_base(1.0, a).unwrap();
        let w_star = ParamVector::new(vec![2.0, 0.0, 1.0]).unwrap();
        let rates = m.rates(w_star.as_slice()).unwrap();
        let y = ObservationSet::new(rates.iter().map(|r| r.round() as u64).collect());
        let c = ConstraintSet::at_most(5.0).unwrap();
        let r = minimize(Loss::LeastSquares, &m, &y, &c, &SolverConfig::default(), None).unwrap();
        let (at_truth, _) = Loss::LeastSquares.evaluate(&m, &y, &w_star).unwrap();
        assert!(r.objective <= at_truth + 1e-12);
        assert!(c.contains(r.w_hat.as_slice(), 1e-9));
    }

    #[test]
    fn equality_mode_stays_on_face() {
        let a = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let m = RateModel::<f64>::with_constant_base(0.5, a).unwrap();
        let y = ObservationSet::new(vec![0, 0, 1]);
        let c = ConstraintSet::equal_to(3.0).unwrap();
        let r = minimize(Loss::PoissonNll, &m, &y, &c, &SolverConfig::default(), None).unwrap();
        assert!((r.w_hat.l1() - 3.0).abs() < 1e-9);
        // symmetric problem: equal split
        assert!((r.w_hat.as_slice()[0] - 1.5).abs() < 1e-6);
    }

    #[test]
    fn rejects_infeasible_start() {
        let (m, y) = scalar_model();
        let c = ConstraintSet::at_most(1.0).unwrap();
        let w0 = ParamVector::new(vec![2.0]).unwrap();
        let err = minimize(Loss::PoissonNll, &m, &y, &c, &SolverConfig::default(), Some(&w0)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn rejects_nonpositive_start_rate() {
        let m = RateModel::with_constant_base(0.0, Matrix::from_rows(vec![vec![1.0, 0.0]]).unwrap()).unwrap();
        let y = ObservationSet::new(vec![1]);
        let c = ConstraintSet::at_most(1.0).unwrap();
        let w0 = ParamVector::new(vec![0.0, 1.0]).unwrap();
        let err = minimize(Loss::PoissonNll, &m, &y, &c, &SolverConfig::default(), Some(&w0)).unwrap_err();
        assert!(err.is_domain());
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig::<f64> {
            armijo_c: 1.5,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(ConstraintSet::at_most(0.0).is_err());
    }
}
