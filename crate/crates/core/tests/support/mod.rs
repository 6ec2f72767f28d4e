//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls the routine it checks.
#![allow(dead_code)]

use poisson_sparse::eval::poisson_log_pmf;
use poisson_sparse::model::Loss;
use poisson_sparse::rng;
use poisson_sparse::solver::ConstraintMode;
use poisson_sparse::{AffineRateModel, Matrix, ObservationSet};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Small random Poisson instance with a nonnegative design and positive base rates.
pub struct Instance {
    pub model: AffineRateModel,
    pub y: ObservationSet,
    pub s: f64,
    pub mode: ConstraintMode,
}

pub fn random_instance(seed: u64, p: usize, n: usize) -> Instance {
    let mut r = rng::stream(seed, 0);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.random::<f64>()).collect()).collect();
    let base: Vec<f64> = (0..n).map(|_| 0.5 + 4.5 * r.random::<f64>()).collect();
    let s = 0.5 + 2.5 * r.random::<f64>();
    let mode = if r.random::<bool>() { ConstraintMode::SumAtMost } else { ConstraintMode::SumEquals };
    let mut w: Vec<f64> = (0..p).map(|_| r.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    let scale = s * r.random::<f64>() / total;
    w.iter_mut().for_each(|x| *x *= scale);
    let model = AffineRateModel::new(base, Matrix::from_rows(rows).unwrap()).unwrap();
    let rates = model.rates(&w).unwrap();
    let y = rates
        .iter()
        .map(|&l| Poisson::new(l).unwrap().sample(&mut r) as u64)
        .collect();
    Instance { model, y: ObservationSet::new(y), s, mode }
}

/// Direct evaluation of the three losses from their definitions.
pub fn loss_value(loss: Loss, model: &AffineRateModel, y: &ObservationSet, w: &[f64]) -> f64 {
    let a = model.matrix();
    let n = model.n();
    let mut total = 0.0;
    for i in 0..n {
        let mut rate = model.base_rates()[i];
        for (j, wj) in w.iter().enumerate() {
            rate += a.get(i, j) * wj;
        }
        let yi = y.counts()[i] as f64;
        total += match loss {
            Loss::PoissonNll => {
                if rate <= 0.0 {
                    return f64::INFINITY;
                }
                rate - yi * rate.ln()
            }
            Loss::RescaledLasso => {
                if rate <= 0.0 {
                    return f64::INFINITY;
                }
                (yi - rate).powi(2) / rate
            }
            Loss::LeastSquares => (yi - rate).powi(2),
        };
    }
    total / n as f64
}

/// Central finite differences of [`loss_value`].
pub fn fd_gradient(loss: Loss, model: &AffineRateModel, y: &ObservationSet, w: &[f64]) -> Vec<f64> {
    (0..w.len())
        .map(|j| {
            let h = 1e-6 * w[j].abs().max(1e-2);
            let mut plus = w.to_vec();
            let mut minus = w.to_vec();
            plus[j] += h;
            minus[j] -= h;
            (loss_value(loss, model, y, &plus) - loss_value(loss, model, y, &minus)) / (2.0 * h)
        })
        .collect()
}

/// Euclidean projection onto `{w ≥ 0, Σw ≤ s}` or `{w ≥ 0, Σw = s}` by
/// enumerating the positive set and whether the sum constraint is active.
pub fn brute_force_projection(v: &[f64], s: f64, mode: ConstraintMode) -> Vec<f64> {
    let p = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let tol = 1e-12 * (1.0 + s);
    for mask in 0u32..(1 << p) {
        let idx: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let mut candidates = Vec::new();
        // sum constraint active: shift the free coordinates by a common θ
        if !idx.is_empty() {
            let theta = (idx.iter().map(|&j| v[j]).sum::<f64>() - s) / idx.len() as f64;
            if mode == ConstraintMode::SumEquals || theta >= 0.0 {
                let mut w = vec![0.0; p];
                idx.iter().for_each(|&j| w[j] = v[j] - theta);
                candidates.push(w);
            }
        }
        // sum constraint inactive
        if mode == ConstraintMode::SumAtMost {
            let mut w = vec![0.0; p];
            idx.iter().for_each(|&j| w[j] = v[j]);
            candidates.push(w);
        }
        for w in candidates {
            let sum: f64 = w.iter().sum();
            let feasible = w.iter().all(|&x| x >= -tol)
                && match mode {
                    ConstraintMode::SumAtMost => sum <= s + tol,
                    ConstraintMode::SumEquals => (sum - s).abs() <= tol,
                };
            if !feasible {
                continue;
            }
            let d: f64 = w.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, w));
            }
        }
    }
    best.expect("feasible set is nonempty").1
}

/// Dense grid search over the feasible set for `p ≤ 3`: a coarse grid, zoomed
/// until the step is at most `1e-4`, then refined twice more.
pub fn grid_minimize(loss: Loss, model: &AffineRateModel, y: &ObservationSet, s: f64, mode: ConstraintMode) -> Vec<f64> {
    let p = model.p();
    assert!((1..=3).contains(&p));
    // free coordinates; in equality mode the last one is s − Σ others
    let d = if mode == ConstraintMode::SumEquals { p - 1 } else { p };
    let complete = |u: &[f64]| -> Option<Vec<f64>> {
        let sum: f64 = u.iter().sum();
        if u.iter().any(|&x| x < 0.0) {
            return None;
        }
        match mode {
            ConstraintMode::SumAtMost => (sum <= s * (1.0 + 1e-15)).then(|| u.to_vec()),
            ConstraintMode::SumEquals => {
                let last = s - sum;
                (last >= -1e-15 * s).then(|| {
                    let mut w = u.to_vec();
                    w.push(last.max(0.0));
                    w
                })
            }
        }
    };
    if d == 0 {
        return vec![s];
    }
    let eval = |u: &[f64]| complete(u).map(|w| loss_value(loss, model, y, &w)).unwrap_or(f64::INFINITY);

    let points_per_side = 8usize;
    let mut step = s / 64.0;
    let mut lo = vec![0.0; d];
    let mut counts = vec![65usize; d];
    let mut best = vec![0.0; d];
    let mut refinements_after_target = 0;
    loop {
        let mut best_val = f64::INFINITY;
        let total: usize = counts.iter().product();
        let mut u = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for c in 0..d {
                u[c] = (lo[c] + (rem % counts[c]) as f64 * step).clamp(0.0, s);
                rem /= counts[c];
            }
            let v = eval(&u);
            if v < best_val {
                best_val = v;
                best.copy_from_slice(&u);
            }
        }
        if step <= 1e-4 {
            if refinements_after_target == 2 {
                break;
            }
            refinements_after_target += 1;
        }
        let half = points_per_side as f64 * step;
        step /= points_per_side as f64;
        for c in 0..d {
            lo[c] = (best[c] - half).max(0.0);
            counts[c] = ((best[c] + half).min(s) - lo[c]).div_euclid(step) as usize + 1;
        }
    }
    complete(&best).unwrap()
}

/// `KL(Poisson(λ1) ‖ Poisson(λ2))` by summing the defining series.
pub fn poisson_kl_series(l1: f64, l2: f64) -> f64 {
    let upper = (l1 + 40.0 * l1.sqrt() + 60.0) as u64;
    let mut total = 0.0;
    let mut comp = 0.0;
    for y in 0..=upper {
        let lp1 = poisson_log_pmf(y, l1);
        let lp2 = poisson_log_pmf(y, l2);
        let term = lp1.exp() * (lp1 - lp2);
        // Kahan summation
        let t = term - comp;
        let next = total + t;
        comp = (next - total) - t;
        total = next;
    }
    total
}

/// `Π e^{−λ} λ^y / y!` as a plain product.
pub fn poisson_pmf_product(y: &[u64], rates: &[f64]) -> f64 {
    y.iter()
        .zip(rates)
        .map(|(&yi, &l)| {
            let mut term = (-l).exp();
            for m in 1..=yi {
                term *= l / m as f64;
            }
            term
        })
        .product()
}

/// Minimum pairwise Hamming distance by direct comparison.
pub fn min_pairwise_distance(words: &[Vec<u8>]) -> Option<usize> {
    let mut best = None;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let d = words[i].iter().zip(&words[j]).filter(|(a, b)| a != b).count();
            best = Some(best.map_or(d, |b: usize| b.min(d)));
        }
    }
    best
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Random point with every coordinate positive and `Σw < s`.
pub fn interior_point<R: Rng>(r: &mut R, p: usize, s: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..p).map(|_| 0.05 + r.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    let scale = s * (0.2 + 0.7 * r.random::<f64>()) / total;
    w.iter_mut().for_each(|x| *x *= scale);
    w
}
