//! Kriging prediction with and without the constraint event.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::constraints::{interpolation_weights, is_feasible, ConstraintSpec, KnotModel};
use crate::error::{Error, Result};
use crate::gp::{posterior, ObservationSet};
use crate::kernels::KernelSpec;
use crate::rng;
use crate::sampler::{
    effective_sample_size, gibbs_sample_from, truncated_standard_normal, ConstrainedSampleSet, Gaussian, SamplerConfig,
    SamplerMethod,
};
use crate::special::ln_normal_sf;

/// Variances down to this negative value are round-off and reported as zero.
const VARIANCE_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionResult {
    pub x0: f64,
    pub mean: f64,
    pub variance: f64,
    pub mean_constrained: f64,
    pub variance_constrained: f64,
    pub mc_draws: usize,
    /// Monte-Carlo standard error of `mean_constrained`.
    pub mc_standard_error: f64,
}

fn clamp_variance(v: f64) -> Result<f64> {
    if v < VARIANCE_FLOOR {
        return Err(Error::EstimationFailed(format!("negative predictive variance {v}")));
    }
    Ok(v.max(0.0))
}

/// Kriging mean and variance of the latent process at `x0`.
pub fn predict(spec: &KernelSpec, obs: &ObservationSet, x0: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::Domain { x: x0 });
    }
    let post = posterior(spec, obs, &[x0])?;
    Ok((post.mean[0], clamp_variance(post.variance(0))?))
}

/// Constrained predictions at each target from one set of constrained posterior draws at the knots.
///
/// Each draw is mapped to a target through the piecewise-affine interpolant. With the rejection
/// sampler the constrained mean is estimated as `Ŷ_m + mean(accepted) - mean(all proposals)`,
/// where `Ŷ_m` is the interpolated kriging mean; the correction vanishes when nothing is rejected.
pub fn predict_constrained(
    spec: &KernelSpec,
    obs: &ObservationSet,
    knots: &KnotModel,
    constraint: &ConstraintSpec,
    targets: &[f64],
    config: &SamplerConfig,
) -> Result<Vec<PredictionResult>> {
    if let Some(&x) = targets.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain { x });
    }
    let post = posterior(spec, obs, knots.knots())?;
    let law = Gaussian::new(post.mean.clone(), &post.covariance)?;
    let weights = targets.iter().map(|&x| interpolation_weights(knots, x)).collect::<Result<Vec<_>>>()?;
    let at = |w: &[(usize, f64); 2], c: &[f64]| -> f64 { w.iter().filter(|(_, wk)| *wk != 0.0).map(|&(j, wk)| wk * c[j]).sum() };
    let (set, rejected) = match config.method {
        SamplerMethod::Rejection { max_tries } => {
            let (set, rejected) = coupled_rejection(&law, constraint, config, max_tries, |c| {
                weights.iter().map(|w| at(w, c)).collect()
            })?;
            (set, Some(rejected))
        }
        SamplerMethod::Gibbs { .. } => (gibbs_sample_from(&law, constraint, Some(knots), config)?, None),
    };
    let draws = set.draws();
    targets
        .iter()
        .zip(&weights)
        .enumerate()
        .map(|(k, (&x0, w))| {
            let (mean, variance) = predict(spec, obs, x0)?;
            let values: Vec<f64> = (0..draws).map(|i| at(w, set.samples.row(i).transpose().as_slice())).collect();
            let v = DVector::from_column_slice(&values);
            let (lo, hi) = (v.min(), v.max());
            let var_c = if draws > 1 { v.variance() * draws as f64 / (draws - 1) as f64 } else { 0.0 };
            let (mean_c, se) = match &rejected {
                Some(rej) => {
                    let kriging_m = at(w, post.mean.as_slice());
                    rej.coupled_mean(k, kriging_m, v.mean(), v.variance(), draws)
                }
                None => (v.mean(), (var_c / effective_sample_size(&values)).sqrt()),
            };
            // The mean of points of a convex set stays in it; clamp away round-off and control-variate overshoot.
            Ok(PredictionResult {
                x0,
                mean,
                variance,
                mean_constrained: mean_c.clamp(lo, hi),
                variance_constrained: var_c,
                mc_draws: draws,
                mc_standard_error: se,
            })
        })
        .collect()
}

/// Per-target first and second moments of the rejected proposals.
struct RejectedMoments {
    count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl RejectedMoments {
    /// Control-variate mean and its delta-method standard error for target `k`.
    fn coupled_mean(&self, k: usize, kriging_m: f64, mean_acc: f64, var_acc: f64, accepted: usize) -> (f64, f64) {
        if self.count == 0 {
            return (kriging_m, 0.0);
        }
        let total = (accepted + self.count) as f64;
        let p = accepted as f64 / total;
        let r = self.count as f64;
        let mean_rej = self.sum[k] / r;
        let var_rej = (self.sum_sq[k] / r - mean_rej * mean_rej).max(0.0);
        let d = mean_acc - mean_rej;
        let mean_c = kriging_m + (1.0 - p) * d;
        let influence = var_acc * (1.0 - p).powi(2) / p + (1.0 - p) * (var_rej + p * d * d);
        (mean_c, (influence / total).sqrt())
    }
}

fn coupled_rejection(
    law: &Gaussian,
    constraint: &ConstraintSpec,
    config: &SamplerConfig,
    max_tries: usize,
    project: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<(ConstrainedSampleSet, RejectedMoments)> {
    config.validate()?;
    if law.dim() != constraint.dim() {
        return Err(Error::DimensionMismatch { expected: constraint.dim(), got: law.dim() });
    }
    let mut rng = rng::from_seed(config.seed);
    let mut samples = DMatrix::zeros(config.draws, law.dim());
    let width = project(law.mean().as_slice()).len();
    let mut rejected = RejectedMoments { count: 0, sum: vec![0.0; width], sum_sq: vec![0.0; width] };
    let mut tries = 0usize;
    for i in 0..config.draws {
        let mut accepted = false;
        for _ in 0..max_tries {
            tries += 1;
            let x = law.draw(&mut rng);
            if is_feasible(constraint, x.as_slice())? {
                samples.row_mut(i).copy_from(&x.transpose());
                accepted = true;
                break;
            }
            rejected.count += 1;
            for (k, v) in project(x.as_slice()).into_iter().enumerate() {
                rejected.sum[k] += v;
                rejected.sum_sq[k] += v * v;
            }
        }
        if !accepted {
            return Err(Error::InfeasibleSuspected { tries, acceptance_rate: i as f64 / tries as f64 });
        }
    }
    let set = ConstrainedSampleSet {
        samples,
        acceptance_rate: Some(config.draws as f64 / tries as f64),
        effective_sample_estimate: None,
        seed_used: config.seed,
    };
    Ok((set, rejected))
}

/// Rare-event estimate of the shift `Ŷ_c - Ŷ_m` caused by the constraint at each target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintImpact {
    pub x0: f64,
    /// Interpolated kriging mean `Ŷ_m(x0)`.
    pub mean: f64,
    /// Estimate of `Ŷ_c(x0) - Ŷ_m(x0)`.
    pub shift: f64,
    pub shift_standard_error: f64,
    /// Estimate of `P(Y_m ∉ E | y)`.
    pub violation_probability: f64,
}

/// One violated side of one constraint row: `a·x > level` (upper) or `a·x < level` (lower).
struct HalfSpace {
    row: usize,
    upper: bool,
    level: f64,
    mean: f64,
    sd: f64,
    ln_prob: f64,
}

/// Estimates `Ŷ_c - Ŷ_m` at each target by importance sampling the violation set.
///
/// The complement of the constraint set is the union of the half-spaces `Λ_r c < lower_r` and
/// `Λ_r c > upper_r`. A half-space is chosen with probability proportional to its exact Gaussian
/// mass, a draw is taken from the posterior restricted to it and weighted by the reciprocal of the
/// number of half-spaces it lies in (Owen, Maximov and Chertkov's union estimator). The relative
/// error stays bounded however small the violation probability is.
pub fn constraint_impact(
    spec: &KernelSpec,
    obs: &ObservationSet,
    knots: &KnotModel,
    constraint: &ConstraintSpec,
    targets: &[f64],
    n_sim: usize,
    seed: u64,
) -> Result<Vec<ConstraintImpact>> {
    if n_sim < 2 {
        return Err(Error::Validation("n_sim must be at least 2".into()));
    }
    if constraint.dim() != knots.m() {
        return Err(Error::DimensionMismatch { expected: knots.m(), got: constraint.dim() });
    }
    let weights = targets.iter().map(|&x| interpolation_weights(knots, x)).collect::<Result<Vec<_>>>()?;
    let at = |w: &[(usize, f64); 2], c: &[f64]| -> f64 { w.iter().filter(|(_, wk)| *wk != 0.0).map(|&(j, wk)| wk * c[j]).sum() };
    let post = posterior(spec, obs, knots.knots())?;
    let mu = post.mean.as_slice();
    let kriging: Vec<f64> = weights.iter().map(|w| at(w, mu)).collect();
    let cov = &post.covariance;

    let row_sigma = |r: usize| -> DVector<f64> {
        let mut v = DVector::zeros(knots.m());
        for (j, a) in constraint.row_entries(r) {
            v += cov.column(j) * a;
        }
        v
    };
    let mut spaces = Vec::new();
    for r in 0..constraint.n_rows() {
        let mean: f64 = constraint.row_entries(r).map(|(j, a)| a * mu[j]).sum();
        let sigma_a = row_sigma(r);
        let var: f64 = constraint.row_entries(r).map(|(j, a)| a * sigma_a[j]).sum();
        let sd = var.max(0.0).sqrt();
        for (upper, level) in [(false, constraint.lower()[r]), (true, constraint.upper()[r])] {
            if level.is_infinite() {
                continue;
            }
            let excess = if upper { mean - level } else { level - mean };
            let ln_prob = if sd > 0.0 {
                ln_normal_sf(-excess / sd)
            } else if excess > 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            if ln_prob > f64::NEG_INFINITY {
                spaces.push(HalfSpace { row: r, upper, level, mean, sd, ln_prob });
            }
        }
    }
    if spaces.iter().any(|h| h.sd == 0.0) {
        return Err(Error::InfeasibleSuspected { tries: 0, acceptance_rate: 0.0 });
    }
    if spaces.is_empty() {
        return Ok(targets
            .iter()
            .zip(&kriging)
            .map(|(&x0, &mean)| ConstraintImpact { x0, mean, shift: 0.0, shift_standard_error: 0.0, violation_probability: 0.0 })
            .collect());
    }

    let ln_total = {
        let top = spaces.iter().map(|h| h.ln_prob).fold(f64::NEG_INFINITY, f64::max);
        top + spaces.iter().map(|h| (h.ln_prob - top).exp()).sum::<f64>().ln()
    };
    let total = ln_total.exp();
    let cumulative: Vec<f64> = spaces
        .iter()
        .scan(0.0, |acc, h| {
            *acc += (h.ln_prob - ln_total).exp();
            Some(*acc)
        })
        .collect();
    let directions: Vec<DVector<f64>> = spaces.iter().map(|h| row_sigma(h.row) / (h.sd * h.sd)).collect();
    let law = Gaussian::new(post.mean.clone(), cov)?;
    let mut rng = rng::from_seed(seed);
    let mut w = Vec::with_capacity(n_sim);
    let mut g = vec![Vec::with_capacity(n_sim); targets.len()];
    for _ in 0..n_sim {
        let u: f64 = rand::Rng::random(&mut rng);
        let k = cumulative.partition_point(|c| *c < u * cumulative[cumulative.len() - 1]).min(spaces.len() - 1);
        let h = &spaces[k];
        let x0 = law.draw(&mut rng);
        let z_level = (h.level - h.mean) / h.sd;
        let z = if h.upper {
            truncated_standard_normal(&mut rng, z_level, f64::INFINITY)
        } else {
            truncated_standard_normal(&mut rng, f64::NEG_INFINITY, z_level)
        };
        let current: f64 = constraint.row_entries(h.row).map(|(j, a)| a * x0[j]).sum();
        let x = x0 + &directions[k] * (h.mean + h.sd * z - current);
        let values = constraint.apply(x.as_slice());
        let hits = spaces
            .iter()
            .filter(|s| if s.upper { values[s.row] > s.level } else { values[s.row] < s.level })
            .count()
            .max(1);
        w.push(1.0 / hits as f64);
        for (gk, wt) in g.iter_mut().zip(&weights) {
            gk.push(at(wt, x.as_slice()));
        }
    }

    let n = n_sim as f64;
    let w_bar = w.iter().sum::<f64>() / n;
    let violation = total * w_bar;
    if violation >= 1.0 {
        return Err(Error::EstimationFailed(format!(
            "violation probability estimate {violation:.3} too large for importance sampling"
        )));
    }
    let denom = 1.0 - violation;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(k, &x0)| {
            let u: Vec<f64> = w.iter().zip(&g[k]).map(|(wi, gi)| wi * (kriging[k] - gi)).collect();
            let u_bar = u.iter().sum::<f64>() / n;
            let shift = total * u_bar / denom;
            let psi: Vec<f64> =
                u.iter().zip(&w).map(|(ui, wi)| total * ((ui - u_bar) + shift * (wi - w_bar)) / denom).collect();
            let var = psi.iter().map(|p| p * p).sum::<f64>() / (n - 1.0);
            ConstraintImpact {
                x0,
                mean: kriging[k],
                shift,
                shift_standard_error: (var / n).sqrt(),
                violation_probability: violation,
            }
        })
        .collect())
}

/// Columns `x0, mean, var, mean_c, var_c, mc_se`.
pub fn write_predictions_csv(results: &[PredictionResult], path: &Path) -> Result<()> {
    write_predictions(results, std::fs::File::create(path)?)
}

pub fn write_predictions(results: &[PredictionResult], writer: impl Write) -> Result<()> {
    let mut out = std::io::BufWriter::new(writer);
    writeln!(out, "x0,mean,var,mean_c,var_c,mc_se")?;
    for r in results {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            r.x0, r.mean, r.variance, r.mean_constrained, r.variance_constrained, r.mc_standard_error
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{build_constraints, ConstraintKind};
    use crate::kernels::{eval_kernel, KernelFamily};

    #[test]
    fn prediction_at_a_design_point_interpolates() {
        let spec = KernelSpec::matern52(2.0, 0.2).unwrap();
        let obs = ObservationSet::new(vec![0.1, 0.4, 0.7], vec![0.3, -1.0, 2.0]).unwrap();
        let (m, v) = predict(&spec, &obs, 0.7).unwrap();
        assert_eq!(m, 2.0);
        assert!(v.abs() < 1e-12);
        assert!(matches!(predict(&spec, &obs, -0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn prediction_outside_support_is_prior() {
        let spec = KernelSpec::new(KernelFamily::Wendland { s: 1.0, mu: 3.0 }, 1.5, 0.2).unwrap();
        let obs = ObservationSet::new(vec![0.0, 0.1], vec![1.0, 2.0]).unwrap();
        assert_eq!(predict(&spec, &obs, 0.9).unwrap(), (0.0, 1.5));
    }

    #[test]
    fn two_point_closed_form() {
        let spec = KernelSpec::exponential(1.0, 0.3).unwrap();
        let obs = ObservationSet::new(vec![0.2, 0.6], vec![1.0, -0.5]).unwrap();
        let k = |a: f64, b: f64| eval_kernel(&spec, (a - b).abs()).unwrap();
        let (r12, x0) = (k(0.2, 0.6), 0.35);
        let det = 1.0 - r12 * r12;
        let (k1, k2) = (k(x0, 0.2), k(x0, 0.6));
        // [k1 k2] R⁻¹ with R⁻¹ = [[1, -r], [-r, 1]] / det.
        let a1 = (k1 - r12 * k2) / det;
        let a2 = (k2 - r12 * k1) / det;
        let (m, v) = predict(&spec, &obs, x0).unwrap();
        assert!((m - (a1 * 1.0 + a2 * -0.5)).abs() < 1e-12);
        assert!((v - (1.0 - a1 * k1 - a2 * k2)).abs() < 1e-12);
    }

    #[test]
    fn vacuous_constraints_reproduce_kriging() {
        let spec = KernelSpec::matern52(1.0, 0.3).unwrap();
        let obs = ObservationSet::new(vec![0.1, 0.5, 0.9], vec![0.4, -0.2, 0.8]).unwrap();
        let knots = KnotModel::equispaced(21).unwrap();
        let none = build_constraints(ConstraintKind::none(), &knots).unwrap();
        let targets = [0.25, 0.7];
        let res = predict_constrained(&spec, &obs, &knots, &none, &targets, &SamplerConfig::rejection(5000, 10, 3)).unwrap();
        for r in &res {
            assert!((r.mean_constrained - r.mean).abs() < 1e-10, "{r:?}");
            assert_eq!(r.mc_standard_error, 0.0);
            // Sample variance se ≈ σ²√(2/(N-1)).
            let se = r.variance * (2.0 / 4999.0f64).sqrt();
            assert!((r.variance_constrained - r.variance).abs() < 3.0 * se, "{r:?}");
        }
    }

    #[test]
    fn half_normal_constrained_mean() {
        // Knot 1 is outside the support of the single observation: prior N(0, 1).
        let spec = KernelSpec::new(KernelFamily::Wendland { s: 1.0, mu: 3.0 }, 1.0, 0.5).unwrap();
        let obs = ObservationSet::new(vec![0.0], vec![0.0]).unwrap();
        let knots = KnotModel::equispaced(2).unwrap();
        let half = build_constraints(ConstraintKind::Bounds { lower: 0.0, upper: f64::INFINITY }, &knots).unwrap();
        for cfg in [SamplerConfig::rejection(4000, 100, 1), SamplerConfig::gibbs(4000, 1)] {
            let r = predict_constrained(&spec, &obs, &knots, &half, &[1.0], &cfg).unwrap()[0];
            let target = (2.0 / std::f64::consts::PI).sqrt();
            assert!((r.mean_constrained - target).abs() < 3.0 * r.mc_standard_error, "{r:?}");
            assert_eq!((r.mean, r.variance), (0.0, 1.0));
        }
    }

    #[test]
    fn coupled_standard_error_is_calibrated() {
        let spec = KernelSpec::new(KernelFamily::Wendland { s: 1.0, mu: 3.0 }, 1.0, 0.5).unwrap();
        let obs = ObservationSet::new(vec![0.0], vec![0.0]).unwrap();
        let knots = KnotModel::equispaced(2).unwrap();
        let b = build_constraints(ConstraintKind::Bounds { lower: -0.5, upper: f64::INFINITY }, &knots).unwrap();
        // E[Z | Z > -a] = φ(a) / Φ(a).
        let a: f64 = 0.5;
        let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let target = phi / crate::special::normal_cdf(a);
        let z: Vec<f64> = (0..300)
            .map(|seed| {
                let r = predict_constrained(&spec, &obs, &knots, &b, &[1.0], &SamplerConfig::rejection(400, 100, seed)).unwrap()[0];
                (r.mean_constrained - target) / r.mc_standard_error
            })
            .collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 0.2, "{mean}");
        assert!((0.85..1.15).contains(&sd), "{sd}");
    }

    fn single_knot_prior() -> (KernelSpec, ObservationSet, KnotModel) {
        // Knot 1 is outside the support of the observation at 0: posterior there is N(0, 1).
        let spec = KernelSpec::new(KernelFamily::Wendland { s: 1.0, mu: 3.0 }, 1.0, 0.5).unwrap();
        (spec, ObservationSet::new(vec![0.0], vec![0.0]).unwrap(), KnotModel::equispaced(2).unwrap())
    }

    #[test]
    fn impact_matches_truncated_normal_mean_in_the_far_tail() {
        let (spec, obs, knots) = single_knot_prior();
        for a in [0.5f64, 2.0, 6.0] {
            let b = build_constraints(ConstraintKind::Bounds { lower: -a, upper: f64::INFINITY }, &knots).unwrap();
            let r = constraint_impact(&spec, &obs, &knots, &b, &[1.0], 4000, 5).unwrap()[0];
            let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let q = crate::special::normal_sf(a);
            let shift = phi / (1.0 - q);
            assert!((r.violation_probability - q).abs() <= 1e-10 * q, "{a}: {r:?}");
            assert!((r.shift - shift).abs() <= 4.0 * r.shift_standard_error, "{a}: {r:?} vs {shift}");
            assert!(r.shift_standard_error < 0.05 * shift, "{a}: {r:?}");
        }
    }

    #[test]
    fn symmetric_bounds_leave_the_mean_unshifted() {
        let (spec, obs, knots) = single_knot_prior();
        let b = build_constraints(ConstraintKind::Bounds { lower: -1.0, upper: 1.0 }, &knots).unwrap();
        let r = constraint_impact(&spec, &obs, &knots, &b, &[1.0], 4000, 2).unwrap()[0];
        assert!((r.violation_probability - 2.0 * crate::special::normal_sf(1.0)).abs() < 1e-12);
        assert!(r.shift.abs() <= 4.0 * r.shift_standard_error);
        let none = build_constraints(ConstraintKind::none(), &knots).unwrap();
        let r = constraint_impact(&spec, &obs, &knots, &none, &[0.3, 1.0], 10, 2).unwrap();
        assert!(r.iter().all(|x| x.shift == 0.0 && x.violation_probability == 0.0));
    }

    #[test]
    fn impact_agrees_with_rejection_on_a_multi_knot_posterior() {
        let spec = KernelSpec::matern52(0.05, 0.3).unwrap();
        let knots = KnotModel::equispaced(11).unwrap();
        let cases = [
            (ConstraintKind::Bounds { lower: -1.0, upper: 1.0 }, vec![-1.0, 0.0, 1.0]),
            (ConstraintKind::Monotone, vec![-0.8, -0.2, 0.9]),
        ];
        for (kind, y) in cases {
            let obs = ObservationSet::new(vec![0.0, 0.5, 1.0], y).unwrap();
            let c = build_constraints(kind, &knots).unwrap();
            let targets = [0.2, 0.7];
            let is = constraint_impact(&spec, &obs, &knots, &c, &targets, 20_000, 8).unwrap();
            let rej = predict_constrained(&spec, &obs, &knots, &c, &targets, &SamplerConfig::rejection(20_000, 10_000, 9)).unwrap();
            for (a, b) in is.iter().zip(&rej) {
                let diff = (a.mean + a.shift) - b.mean_constrained;
                let se = a.shift_standard_error.hypot(b.mc_standard_error);
                assert!(diff.abs() <= 4.0 * se, "{kind:?}: {a:?} vs {b:?}");
                assert!(a.shift.abs() > 4.0 * a.shift_standard_error, "{kind:?}: {a:?}");
            }
        }
    }

    #[test]
    fn constrained_means_respect_bounds() {
        let spec = KernelSpec::matern52(2.0, 0.2).unwrap();
        let obs = ObservationSet::new(vec![0.0, 0.5, 1.0], vec![0.9, 0.95, -0.9]).unwrap();
        let knots = KnotModel::equispaced(11).unwrap();
        let b = build_constraints(ConstraintKind::Bounds { lower: -1.0, upper: 1.0 }, &knots).unwrap();
        let targets = [0.1, 0.3, 0.55, 0.8];
        let res = predict_constrained(&spec, &obs, &knots, &b, &targets, &SamplerConfig::gibbs(500, 4)).unwrap();
        for r in &res {
            assert!((-1.0..=1.0).contains(&r.mean_constrained));
            assert!(r.variance_constrained <= r.variance + 3.0 * r.variance * (2.0 / 499.0f64).sqrt());
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_predictions_csv(&res, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 5);
    }
}
