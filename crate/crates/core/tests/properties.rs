use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use cgp_core::constraints::{build_constraints, is_feasible, ConstraintKind, KnotModel};
use cgp_core::gp::{equispaced, posterior, sequential_decomposition, simulate_gp, ObservationSet};
use cgp_core::kernels::KernelSpec;
use cgp_core::linalg::covariance_matrix;
use cgp_core::prediction::predict_constrained;
use cgp_core::sampler::{gibbs_sample, SamplerConfig};

fn matern52(sigma2: f64, rho: f64, h: f64) -> f64 {
    let r = 5f64.sqrt() * h.abs() / rho;
    sigma2 * (1.0 + r + r * r / 3.0) * (-r).exp()
}

fn exponential(sigma2: f64, rho: f64, h: f64) -> f64 {
    sigma2 * (-h.abs() / rho).exp()
}

fn dense(points: &[f64], k: impl Fn(f64) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), points.len(), |i, j| k(points[i] - points[j]))
}

fn sorted_points(raw: Vec<f64>) -> Vec<f64> {
    let mut p = raw;
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup_by(|a, b| (*a - *b).abs() < 0.01);
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sum_of_squared_innovations_is_the_quadratic_form(
        raw in prop::collection::vec(0.0f64..1.0, 1..40),
        sigma2 in 0.2f64..3.0,
        rho in 0.02f64..0.3,
        exp_family in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let points = sorted_points(raw);
        let (spec, r) = if exp_family {
            (KernelSpec::exponential(sigma2, rho).unwrap(), dense(&points, |h| exponential(sigma2, rho, h)))
        } else {
            (KernelSpec::matern52(sigma2, rho).unwrap(), dense(&points, |h| matern52(sigma2, rho, h)))
        };
        let Some(r_inv) = r.clone().try_inverse() else { return Ok(()) };
        let cond = r.norm() * r_inv.norm();
        if cond > 1e7 {
            return Ok(());
        }
        let y = simulate_gp(&spec, &points, seed).unwrap();
        let obs = ObservationSet::new(points, y.clone()).unwrap();
        let w = sequential_decomposition(&spec, &obs).unwrap();
        let yv = DVector::from_vec(y);
        let q = (yv.transpose() * &r_inv * &yv)[0];
        let s: f64 = w.iter().map(|v| v * v).sum();
        prop_assert!((s - q).abs() <= 1e-8 * (1.0 + q), "{s} vs {q}");
    }

    #[test]
    fn kriging_interpolates_and_shrinks_variance(
        raw in prop::collection::vec(0.0f64..1.0, 2..25),
        extra in prop::collection::vec(0.0f64..1.0, 1..10),
        rho in 0.05f64..0.4,
        seed in any::<u64>(),
    ) {
        let points = sorted_points(raw);
        let spec = KernelSpec::matern52(1.5, rho).unwrap();
        let y = simulate_gp(&spec, &points, seed).unwrap();
        let obs = ObservationSet::new(points.clone(), y.clone()).unwrap();
        let at_data = posterior(&spec, &obs, &points).unwrap();
        for i in 0..points.len() {
            prop_assert!((at_data.mean[i] - y[i]).abs() <= 1e-6 * (1.0 + y[i].abs()));
            prop_assert!(at_data.variance(i) <= 1e-8 * 1.5);
        }
        let post = posterior(&spec, &obs, &extra).unwrap();
        for i in 0..extra.len() {
            prop_assert!(post.variance(i) <= 1.5 + 1e-10);
            prop_assert!(post.variance(i) >= 0.0);
        }
    }

    #[test]
    fn gibbs_draws_are_feasible_and_reproducible(
        m in 3usize..9,
        rho in 0.1f64..0.6,
        shift in -1.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let knots = KnotModel::equispaced(m).unwrap();
        let spec = KernelSpec::matern52(1.0, rho).unwrap();
        let cov = covariance_matrix(&spec, knots.knots()).unwrap().entries().clone();
        let mean = DVector::from_fn(m, |i, _| shift * (1.0 - 2.0 * i as f64 / (m - 1) as f64));
        let constraint = build_constraints(ConstraintKind::Monotone, &knots).unwrap();
        let config = SamplerConfig::gibbs(40, seed);
        let a = gibbs_sample(&mean, &cov, &constraint, Some(&knots), &config).unwrap();
        let b = gibbs_sample(&mean, &cov, &constraint, Some(&knots), &config).unwrap();
        prop_assert_eq!(&a.samples, &b.samples);
        for i in 0..a.draws() {
            prop_assert!(is_feasible(&constraint, &a.row(i)).unwrap());
        }
    }
}

#[test]
fn simulated_covariance_matches_the_kernel() {
    let points = [0.0, 0.1, 0.35, 0.8];
    let spec = KernelSpec::matern52(2.0, 0.3).unwrap();
    let reps = 5000;
    let draws: Vec<Vec<f64>> = (0..reps).map(|r| simulate_gp(&spec, &points, 1000 + r as u64).unwrap()).collect();
    for i in 0..points.len() {
        for j in 0..=i {
            let prods: Vec<f64> = draws.iter().map(|d| d[i] * d[j]).collect();
            let mean = prods.iter().sum::<f64>() / reps as f64;
            let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            let truth = matern52(2.0, 0.3, points[i] - points[j]);
            assert!((mean - truth).abs() <= 5.0 * se, "({i},{j}): {mean} vs {truth} (se {se})");
        }
    }
}

#[test]
fn constrained_predictive_variance_does_not_exceed_kriging_variance() {
    let spec = KernelSpec::matern52(1.0, 0.2).unwrap();
    let x = equispaced(6);
    let y = vec![0.2, 0.8, 0.9, -0.3, -0.9, 0.1];
    let obs = ObservationSet::new(x.clone(), y).unwrap();
    let knots = KnotModel::containing(61, &x).unwrap();
    let constraint = build_constraints(ConstraintKind::Bounds { lower: -1.0, upper: 1.0 }, &knots).unwrap();
    let targets = [0.1, 0.3, 0.5, 0.7, 0.9];
    let config = SamplerConfig::rejection(4000, 100_000, 17);
    for p in predict_constrained(&spec, &obs, &knots, &constraint, &targets, &config).unwrap() {
        let se_var = p.variance_constrained * (2.0 / (p.mc_draws - 1) as f64).sqrt();
        assert!(p.variance_constrained <= p.variance + 3.0 * se_var, "{p:?}");
        assert!((-1.0..=1.0).contains(&p.mean_constrained));
    }
}
