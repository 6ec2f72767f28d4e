//! Error metrics, support recovery, ROC curves and likelihood-based model comparison.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{check_len, Error, Result};
use crate::model::{ObservationSet, ParamVector, RateModel};
use crate::scalar::Scalar;
use crate::solver::threshold_support;

pub fn l2_error<T: Scalar>(w_hat: &ParamVector<T>, w_star: &ParamVector<T>) -> Result<T> {
    check_len("estimate vs truth", w_star.len(), w_hat.len())?;
    Ok(w_hat
        .as_slice()
        .iter()
        .zip(w_star.as_slice())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub l2_error: f64,
    /// True when the thresholded support equals the true support.
    pub support_success: bool,
    pub detections: usize,
    pub false_alarms: usize,
}

/// Thresholds `w_hat` strictly at `t` and compares with the exact support of `w_star`.
pub fn support_metrics<T: Scalar>(w_hat: &ParamVector<T>, w_star: &ParamVector<T>, t: T) -> Result<RecoveryMetrics> {
    if !(t >= T::zero()) {
        return Err(Error::Domain(format!("threshold {t} must be nonnegative")));
    }
    let l2 = l2_error(w_hat, w_star)?.as_f64();
    let truth = w_star.support();
    let est = threshold_support(w_hat, t);
    let mut in_truth = vec![false; w_star.len()];
    truth.iter().for_each(|&j| in_truth[j] = true);
    let detections = est.iter().filter(|&&j| in_truth[j]).count();
    let false_alarms = est.len() - detections;
    Ok(RecoveryMetrics {
        l2_error: l2,
        support_success: detections == truth.len() && false_alarms == 0,
        detections,
        false_alarms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ROCPoint {
    pub threshold: f64,
    /// Mean fraction of true support declared.
    pub pd: f64,
    /// Mean fraction of off-support coordinates declared.
    pub pf: f64,
}

/// One point per threshold, averaging detection and false-alarm rates over trials.
pub fn roc_curve(
    w_hats: &[ParamVector<f64>],
    w_stars: &[ParamVector<f64>],
    thresholds: &[f64],
) -> Result<Vec<ROCPoint>> {
    if w_hats.is_empty() || thresholds.is_empty() {
        return Err(Error::Config("ROC needs at least one estimate and one threshold".into()));
    }
    check_len("estimates vs truths", w_stars.len(), w_hats.len())?;
    if thresholds.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Config("ROC thresholds must be sorted in descending order".into()));
    }
    let trials = w_hats.len() as f64;
    thresholds
        .iter()
        .map(|&t| {
            let (mut pd, mut pf) = (0.0, 0.0);
            for (wh, ws) in w_hats.iter().zip(w_stars) {
                let m = support_metrics(wh, ws, t)?;
                let k = ws.sparsity();
                let off = ws.len() - k;
                if k > 0 {
                    pd += m.detections as f64 / k as f64;
                }
                if off > 0 {
                    pf += m.false_alarms as f64 / off as f64;
                }
            }
            Ok(ROCPoint { threshold: t, pd: pd / trials, pf: pf / trials })
        })
        .collect()
}

/// Trapezoidal area under the `(pf, pd)` curve, closed with `(0, 0)` and `(1, 1)`.
pub fn auc(points: &[ROCPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.pf, p.pd)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// Standard normal upper tail `Q(x) = P(Z > x)`.
pub fn normal_q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Normalizer of the discretized Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// `Q(−μ/σ)`, the total mass over `y ≥ 0`.
    #[default]
    Telescoping,
    /// `Q(μ/σ)` as printed in the histogram formula; not a proper PMF for `μ ≠ 0`.
    Printed,
}

/// `P(a < Z ≤ b)` for standard normal `Z`, evaluated on the tail that
/// avoids cancellation.
fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        normal_q(a) - normal_q(b)
    } else if b <= 0.0 {
        normal_q(-b) - normal_q(-a)
    } else {
        1.0 - normal_q(b) - normal_q(-a)
    }
}

/// `(Q((y−μ)/σ) − Q((y+1−μ)/σ)) / Z`
pub fn discretized_gaussian_pmf(y: u64, mu: f64, sigma: f64) -> Result<f64> {
    discretized_gaussian_pmf_with(y, mu, sigma, Normalizer::Telescoping)
}

pub fn discretized_gaussian_pmf_with(y: u64, mu: f64, sigma: f64, norm: Normalizer) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(Error::Domain(format!("need finite mu and sigma > 0, got ({mu}, {sigma})")));
    }
    let yf = y as f64;
    let mass = normal_interval((yf - mu) / sigma, (yf + 1.0 - mu) / sigma);
    let z = match norm {
        Normalizer::Telescoping => normal_q(-mu / sigma),
        Normalizer::Printed => normal_q(mu / sigma),
    };
    Ok(mass.max(0.0) / z)
}

/// `log Q(x)`, switching to the asymptotic tail series where `Q` underflows.
pub fn log_normal_q(x: f64) -> f64 {
    if x < 30.0 {
        return normal_q(x).ln();
    }
    let x2 = x * x;
    let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2);
    -0.5 * x2 - (x * (2.0 * std::f64::consts::PI).sqrt()).ln() + series.ln()
}

/// `log P(a < Z ≤ b)`, finite far into either tail.
fn log_normal_interval(a: f64, b: f64) -> f64 {
    let tail = |lo: f64, hi: f64| {
        let (la, lb) = (log_normal_q(lo), log_normal_q(hi));
        la + (-(lb - la).exp()).ln_1p()
    };
    if a >= 0.0 {
        tail(a, b)
    } else if b <= 0.0 {
        tail(-b, -a)
    } else {
        normal_interval(a, b).ln()
    }
}

/// Logarithm of [`discretized_gaussian_pmf`], computed without underflow.
pub fn discretized_gaussian_log_pmf(y: u64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(Error::Domain(format!("need finite mu and sigma > 0, got ({mu}, {sigma})")));
    }
    let yf = y as f64;
    Ok(log_normal_interval((yf - mu) / sigma, (yf + 1.0 - mu) / sigma) - log_normal_q(-mu / sigma))
}

/// `−λ + y log λ − log y!`
pub fn poisson_log_pmf(y: u64, rate: f64) -> f64 {
    if rate == 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -rate + y as f64 * rate.ln() - ln_gamma(y as f64 + 1.0)
}

/// Likelihood family for held-out scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    PoissonMl,
    /// Discretized Gaussian with `μ = σ² = λ`.
    DiscretizedGaussian,
}

fn positive_rates(model: &RateModel<f64>, w: &ParamVector<f64>) -> Result<Vec<f64>> {
    let rates = model.rates(w.as_slice())?;
    if let Some((i, &r)) = rates.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::NonPositiveRate { index: i, rate: r });
    }
    Ok(rates)
}

fn family_log_mass(family: Family, y: u64, rate: f64) -> Result<f64> {
    Ok(match family {
        Family::PoissonMl => poisson_log_pmf(y, rate),
        Family::DiscretizedGaussian => discretized_gaussian_log_pmf(y, rate, rate.sqrt())?,
    })
}

/// Sum of per-observation log masses at rates `λ_i(w)` of the test model.
pub fn heldout_loglik(
    y_test: &ObservationSet,
    model_test: &RateModel<f64>,
    w: &ParamVector<f64>,
    family: Family,
) -> Result<f64> {
    check_len("held-out observations vs rows", model_test.n(), y_test.len())?;
    let rates = positive_rates(model_test, w)?;
    y_test
        .counts()
        .iter()
        .zip(&rates)
        .map(|(&y, &r)| family_log_mass(family, y, r))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactor {
    pub log_bf: f64,
    pub log_numerator: f64,
    pub log_denominator: f64,
    /// The Gaussian mass underflowed to zero for some observation.
    pub zero_denominator: bool,
}

/// Log Bayes factor of the Poisson fit at `w_ml` against the discretized
/// Gaussian (`μ = σ² = λ`) at `w_ls`.
pub fn bayes_factor(
    y: &ObservationSet,
    model: &RateModel<f64>,
    w_ml: &ParamVector<f64>,
    w_ls: &ParamVector<f64>,
) -> Result<BayesFactor> {
    let log_numerator = heldout_loglik(y, model, w_ml, Family::PoissonMl)?;
    let log_denominator = heldout_loglik(y, model, w_ls, Family::DiscretizedGaussian)?;
    let zero_denominator = log_denominator == f64::NEG_INFINITY;
    Ok(BayesFactor {
        log_bf: if zero_denominator { f64::INFINITY } else { log_numerator - log_denominator },
        log_numerator,
        log_denominator,
        zero_denominator,
    })
}
