mod support;

use poisson_sparse::eval;
use poisson_sparse::model::Loss;
use poisson_sparse::sensing::{self, MatrixKind, MatrixSpec};
use poisson_sparse::simulate::{self, SignalSpec};
use poisson_sparse::solver::{self, ConstraintMode, ConstraintSet};
use poisson_sparse::{rng, BoundInputs, ParamVector, SolverConfig};
use proptest::prelude::*;
use support::*;

fn vector(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projections_are_feasible_idempotent_and_nonexpansive(
        v in vector(12), u in vector(12), s in 0.01f64..10.0,
    ) {
        let u: Vec<f64> = u.iter().cycle().take(v.len()).copied().collect();
        for (mode, proj) in [
            (ConstraintMode::SumAtMost, solver::project_nonneg_l1 as fn(&[f64], f64) -> Vec<f64>),
            (ConstraintMode::SumEquals, solver::project_simplex as fn(&[f64], f64) -> Vec<f64>),
        ] {
            let pv = proj(&v, s);
            let cs = ConstraintSet::new(s, mode).unwrap();
            prop_assert!(cs.contains(&pv, 1e-9));
            prop_assert!(l2_distance(&proj(&pv, s), &pv) <= 1e-10 * (1.0 + s));
            let pu = proj(&u, s);
            prop_assert!(l2_distance(&pv, &pu) <= l2_distance(&v, &u) + 1e-10);
        }
    }

    #[test]
    fn small_projections_match_enumeration(v in vector(4), s in 0.01f64..5.0) {
        prop_assert!(l2_distance(&solver::project_nonneg_l1(&v, s), &brute_force_projection(&v, s, ConstraintMode::SumAtMost)) <= 1e-8);
        prop_assert!(l2_distance(&solver::project_simplex(&v, s), &brute_force_projection(&v, s, ConstraintMode::SumEquals)) <= 1e-8);
    }

    #[test]
    fn signals_have_exact_sparsity_and_mass(p in 1usize..300, frac in 0.0f64..1.0, s in 1e-3f64..1e5, seed: u64) {
        let k = 1 + ((p - 1) as f64 * frac) as usize;
        let w = simulate::generate_sparse_signal(&SignalSpec { p, k, s, seed }).unwrap();
        prop_assert_eq!(w.sparsity(), k);
        prop_assert!(w.as_slice().iter().all(|&x| x >= 0.0));
        prop_assert!((w.l1() - s).abs() <= 1e-12 * s);
    }

    #[test]
    fn designs_and_counts_are_prefix_stable(n in 1usize..40, extra in 1usize..40, p in 1usize..20, seed: u64) {
        for kind in [MatrixKind::Uniform01, MatrixKind::beta_1_3(), MatrixKind::alt_dist()] {
            let small = sensing::generate_matrix(&MatrixSpec { kind, n, p, seed }).unwrap();
            let big = sensing::generate_matrix(&MatrixSpec { kind, n: n + extra, p, seed }).unwrap();
            prop_assert_eq!(&small, &big.top_rows(n).unwrap());
        }
        let rates: Vec<f64> = (0..n + extra).map(|i| 0.5 + i as f64).collect();
        let big = simulate::sample_counts(&rates, seed).unwrap();
        let small = simulate::sample_counts(&rates[..n], seed).unwrap();
        prop_assert_eq!(&small[..], &big[..n]);
    }

    #[test]
    fn seeds_are_deterministic(seed: u64, a: u64, b: u64) {
        prop_assert_eq!(rng::derive_seed(seed, &[a, b]), rng::derive_seed(seed, &[a, b]));
        if a != b {
            prop_assert_ne!(rng::derive_seed(seed, &[a]), rng::derive_seed(seed, &[b]));
        }
    }

    #[test]
    fn support_metrics_partition_the_estimate(
        hat in prop::collection::vec(0.0f64..1.0, 20), star in prop::collection::vec(0.0f64..1.0, 20),
        zero_mask in prop::collection::vec(any::<bool>(), 20), t in 0.0f64..0.8,
    ) {
        let star: Vec<f64> = star.iter().zip(&zero_mask).map(|(&x, &z)| if z { 0.0 } else { x }).collect();
        let (wh, ws) = (ParamVector::new(hat.clone()).unwrap(), ParamVector::new(star.clone()).unwrap());
        let m = eval::support_metrics(&wh, &ws, t).unwrap();
        let est = solver::threshold_support(&wh, t);
        prop_assert_eq!(m.detections + m.false_alarms, est.len());
        prop_assert_eq!(m.support_success, est == ws.support());
        let truth = ws.support().len();
        prop_assert!(m.detections <= truth);
    }

    #[test]
    fn thresholded_support_shrinks_with_threshold(w in prop::collection::vec(0.0f64..1.0, 1..30), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let w = ParamVector::new(w).unwrap();
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let big = solver::threshold_support(&w, lo);
        let small = solver::threshold_support(&w, hi);
        prop_assert!(small.iter().all(|j| big.contains(j)));
    }

    #[test]
    fn solver_output_is_feasible_and_not_worse_than_start(seed in 0u64..10_000, p in 1usize..8) {
        let inst = random_instance(seed, p, 20);
        let cs = ConstraintSet::new(inst.s, inst.mode).unwrap();
        for loss in [Loss::PoissonNll, Loss::RescaledLasso, Loss::LeastSquares] {
            let res = solver::minimize(loss, &inst.model, &inst.y, &cs, &SolverConfig::default(), None).unwrap();
            prop_assert!(cs.contains(res.w_hat.as_slice(), 1e-9));
            let start = loss_value(loss, &inst.model, &inst.y, &cs.center(p));
            prop_assert!(res.objective <= start + 1e-12 * start.abs().max(1.0));
        }
    }

    #[test]
    fn upper_bound_dominates_radius_and_scales(
        lmin in 0.1f64..10.0, ratio in 1.0f64..100.0, hfrac in 0.0f64..1.0, a_max in 1.0f64..5.0,
        gamma in 0.01f64..2.0, k in 1usize..50, n in 1usize..5000, zeta in 0.001f64..0.999,
    ) {
        let lmax = lmin * ratio;
        let inp = BoundInputs {
            lambda_min: lmin,
            lambda_max: lmax,
            lambda_harmonic: lmin + hfrac * (lmax - lmin),
            a_max,
            gamma_k: gamma,
            k,
            n,
            zeta,
        };
        let c = poisson_sparse::bounds::sc_constants(&inp).unwrap();
        let t1 = poisson_sparse::bounds::theorem1_bound(&inp).unwrap();
        prop_assert!(c.delta <= t1);
        let t4k = poisson_sparse::bounds::theorem1_bound(&BoundInputs { k: 4 * k, ..inp }).unwrap();
        let t4n = poisson_sparse::bounds::theorem1_bound(&BoundInputs { n: 4 * n, ..inp }).unwrap();
        prop_assert!((t4k / t1 - 2.0).abs() <= 1e-14);
        prop_assert!((t4n / t1 - 0.5).abs() <= 1e-14);
    }
}
