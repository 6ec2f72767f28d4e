//! Distributional checks of the generators against their target laws.

use poisson_sparse::bounds;
use poisson_sparse::sensing::{self, MatrixKind, MatrixSpec};
use poisson_sparse::simulate::{self, SignalSpec};
use poisson_sparse::{AffineRateModel, Matrix, ParamVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[test]
fn support_is_uniform_over_coordinates() {
    let (p, k, trials) = (400, 5, 20_000);
    let mut hits = vec![0usize; p];
    for t in 0..trials {
        let w = simulate::generate_sparse_signal(&SignalSpec { p, k, s: 3.0, seed: t }).unwrap();
        assert_eq!(w.sparsity(), k);
        assert!((w.l1() - 3.0).abs() < 1e-12);
        for j in w.support() {
            hits[j] += 1;
        }
    }
    let expected = k as f64 / p as f64;
    let freq: Vec<f64> = hits.iter().map(|&h| h as f64 / trials as f64).collect();
    let mean: f64 = freq.iter().sum::<f64>() / p as f64;
    assert!((mean - expected).abs() < 1e-12);
    // per-coordinate standard error is √(q(1−q)/trials) ≈ 0.00078
    let worst = freq.iter().map(|f| (f - expected).abs()).fold(0.0, f64::max);
    assert!(worst < 0.0045, "worst deviation {worst}");
}

#[test]
fn poisson_counts_have_the_right_moments() {
    let rate = 100.0;
    let rates = vec![rate; 50_000];
    let y = simulate::sample_counts(&rates, 9).unwrap();
    let n = y.len() as f64;
    let mean = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = y.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // standard errors: √(λ/n) ≈ 0.045 for the mean, ≈ λ√(2/n) ≈ 0.63 for the variance
    assert!((mean - rate).abs() < 0.25, "mean {mean}");
    assert!((var - rate).abs() < 3.5, "variance {var}");
}

#[test]
fn small_rate_counts_pass_chi_square() {
    let rate = 5.0;
    let y = simulate::sample_counts(&vec![rate; 40_000], 21).unwrap();
    let n = y.len() as f64;
    // bins 0..=11 and a tail bin
    let mut observed = [0.0; 13];
    for &v in &y {
        observed[(v as usize).min(12)] += 1.0;
    }
    let mut pmf = [0.0; 13];
    let mut term = (-rate as f64).exp();
    for (m, slot) in pmf.iter_mut().enumerate().take(12) {
        if m > 0 {
            term *= rate / m as f64;
        }
        *slot = term;
    }
    pmf[12] = 1.0 - pmf[..12].iter().sum::<f64>();
    let stat: f64 = observed.iter().zip(&pmf).map(|(o, p)| (o - n * p).powi(2) / (n * p)).sum();
    let critical = ChiSquared::new(12.0).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} vs {critical}");
}

#[test]
fn alt_dist_point_masses() {
    let a = sensing::generate_matrix(&MatrixSpec {
        kind: MatrixKind::alt_dist(),
        n: 400,
        p: 250,
        seed: 4,
    })
    .unwrap();
    let total = a.as_slice().len() as f64;
    let zeros = a.as_slice().iter().filter(|&&x| x == 0.0).count() as f64 / total;
    let twos = a.as_slice().iter().filter(|&&x| x == 2.0).count() as f64 / total;
    let target = Normal::new(0.0, 1.0).unwrap().cdf(-2.0);
    // standard error √(0.0228·0.977/10⁵) ≈ 0.00047
    assert!((zeros - target).abs() < 0.002, "zero mass {zeros} vs {target}");
    assert!((twos - target).abs() < 0.002, "mass at 2 {twos} vs {target}");
    assert!(a.as_slice().iter().all(|&x| (0.0..=2.0).contains(&x)));
}

#[test]
fn beta_design_mean() {
    let a = sensing::generate_matrix(&MatrixSpec {
        kind: MatrixKind::beta_1_3(),
        n: 200,
        p: 200,
        seed: 8,
    })
    .unwrap();
    let mean = a.as_slice().iter().sum::<f64>() / a.as_slice().len() as f64;
    // Beta(1, 3) has mean 1/4 and variance 3/80
    assert!((mean - 0.25).abs() < 0.005, "mean {mean}");
}

#[test]
fn bernstein_radius_covers_centered_deviation() {
    let a = Matrix::zeros(200, 3);
    for lh in [5.0, 50.0] {
        let model = AffineRateModel::with_constant_base(lh, a.clone()).unwrap();
        let rep = bounds::bernstein_coverage(&model, &ParamVector::zeros(3), 0.1, 4000, 3).unwrap();
        assert!((rep.lambda_harmonic - lh).abs() < 1e-12);
        assert!(rep.frequency >= 0.9, "coverage {}", rep.frequency);
        assert!(rep.frequency_per_term < rep.frequency);
    }
    // the radius is ≈ 3.46 standard deviations of the centered mean at any rate
    let huge = AffineRateModel::with_constant_base(1e6, Matrix::zeros(200, 2)).unwrap();
    let rep = bounds::bernstein_coverage(&huge, &ParamVector::zeros(2), 0.1, 2000, 1).unwrap();
    assert!(rep.frequency >= 0.99, "coverage {}", rep.frequency);
    assert!(rep.frequency_per_term < 0.01);
}

#[test]
fn curvature_margin_on_orthogonal_design() {
    // identity design: ‖Au‖²/n = ‖u‖²/n, so γ = 1/n is exact
    let n = 6;
    let model = AffineRateModel::with_constant_base(2.0, Matrix::identity(n)).unwrap();
    let w = ParamVector::new(vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.5]).unwrap();
    let rep = bounds::strong_convexity_diagnostic(&model, &w, 1.0 / n as f64, 500, 2).unwrap();
    assert!(rep.samples_used > 0);
    assert!(rep.min_margin >= -1e-12, "margin {}", rep.min_margin);
}
