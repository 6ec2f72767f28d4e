//! Ground-truth signals, Poisson observations and the quenching-model builder.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::matrix::Matrix;
use crate::model::{ObservationSet, ParamVector, RateModel};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub p: usize,
    pub k: usize,
    pub s: f64,
    pub seed: u64,
}

/// Uniformly random support of size `k`; nonzero values are drawn from
/// `U(0, 1]` and rescaled so that `‖w‖₁ = s`.
pub fn generate_sparse_signal(spec: &SignalSpec) -> Result<ParamVector<f64>> {
    let SignalSpec { p, k, s, seed } = *spec;
    if k == 0 || k > p {
        return Err(Error::Config(format!("sparsity {k} must lie in 1..={p}")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Config(format!("amplitude {s} must be positive")));
    }
    let mut r = rng::stream(seed, 0);
    let support = index::sample(&mut r, p, k).into_vec();
    let values: Vec<f64> = (0..k).map(|_| 1.0 - r.random::<f64>()).collect();
    let total: f64 = values.iter().sum();
    let mut w = vec![0.0; p];
    for (&j, v) in support.iter().zip(&values) {
        w[j] = v * s / total;
    }
    // push the rounding residue onto the largest entry
    let residue = s - w.iter().sum::<f64>();
    let jmax = support
        .iter()
        .copied()
        .max_by(|&a, &b| w[a].total_cmp(&w[b]))
        .expect("k >= 1");
    w[jmax] += residue;
    ParamVector::new(w)
}

/// One Poisson draw per row at rate `λ0_i + a_iᵀ w⋆`. Row `i` uses the
/// stream `(seed, i)`, so truncating the model truncates the draws.
pub fn sample_observations<T: Scalar>(
    model: &RateModel<T>,
    w_star: &ParamVector<T>,
    seed: u64,
) -> Result<ObservationSet> {
    let rates = model.rates(w_star.as_slice())?;
    let rates: Vec<f64> = rates.into_iter().map(Scalar::as_f64).collect();
    sample_counts(&rates, seed).map(ObservationSet::new)
}

/// Exact Poisson draws for the given rates; rate 0 yields 0.
pub fn sample_counts(rates: &[f64], seed: u64) -> Result<Vec<u64>> {
    rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::NonPositiveRate { index: i, rate });
            }
            if rate == 0.0 {
                return Ok(0);
            }
            let mut r = rng::stream(seed, i as u64);
            let d = Poisson::new(rate).map_err(|e| Error::Domain(e.to_string()))?;
            Ok(d.sample(&mut r) as u64)
        })
        .collect()
}

/// `λ_i(1 − q_iᵀ w)` written affinely: base rates `λ`, matrix entries `−λ_i q_ij`.
pub fn make_quenching_model<T: Scalar>(lambda_base: Vec<T>, q: &Matrix<T>) -> Result<RateModel<T>> {
    check_len("quenching base rates vs rows", q.rows(), lambda_base.len())?;
    if let Some(i) = lambda_base.iter().position(|l| !(*l > T::zero())) {
        return Err(Error::Domain(format!("base rate at index {i} must be positive")));
    }
    if let Some(pos) = q.as_slice().iter().position(|x| !(*x >= T::zero() && *x < T::one())) {
        return Err(Error::Domain(format!(
            "quenching weight ({}, {}) must lie in [0, 1)",
            pos / q.cols().max(1),
            pos % q.cols().max(1)
        )));
    }
    let mut data = Vec::with_capacity(q.rows() * q.cols());
    for (i, &l) in lambda_base.iter().enumerate() {
        data.extend(q.row(i).iter().map(|&x| -(l * x)));
    }
    let matrix = Matrix::new(q.rows(), q.cols(), data)?;
    RateModel::new(lambda_base, matrix)
}
