//! Zero-mean Gaussian process on [0, 1]: simulation, likelihood, kriging.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{covariance_matrix, cross_covariance};
use crate::rng;

/// Interpolation tolerance: posterior variance below this multiple of σ² is treated as zero.
pub const INTERPOLATION_TOL: f64 = 1e-8;

/// Design points in [0, 1] (strictly increasing) and the values observed there.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    points: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    x: f64,
    y: f64,
}

impl ObservationSet {
    /// Builds an observation set; points must be strictly increasing and lie in [0, 1].
    pub fn new(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: values.len() });
        }
        if let Some(&x) = points.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain { x });
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation("observation points must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("observed values must be finite".into()));
        }
        Ok(Self { points, values })
    }

    /// Sorts `(x, y)` pairs into canonical order before validating.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.iter().any(|p| p.0.is_nan()) {
            return Err(Error::Validation("NaN design point".into()));
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (points, values) = pairs.into_iter().unzip();
        Self::new(points, values)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    /// Reads a two-column `x,y` CSV with a header line.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let pairs = reader
            .deserialize::<CsvRow>()
            .map(|r| r.map(|row| (row.x, row.y)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_pairs(pairs)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        for (&x, &y) in self.points.iter().zip(&self.values) {
            writer.serialize(CsvRow { x, y })?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// `n` equispaced points `0, 1/(n-1), ..., 1` (or `{0.5}` for n = 1).
pub fn equispaced(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Exact draw `L z` of the process (nugget included) at `points`.
pub fn simulate_gp(spec: &KernelSpec, points: &[f64], seed: u64) -> Result<Vec<f64>> {
    let cov = covariance_matrix(spec, points)?;
    let mut rng = rng::from_seed(seed);
    let z = DVector::from_fn(points.len(), |_, _| StandardNormal.sample(&mut rng));
    Ok((cov.cholesky() * z).iter().copied().collect())
}

/// Gaussian log-likelihood of the observations under `spec` (nugget included).
pub fn log_likelihood(spec: &KernelSpec, obs: &ObservationSet) -> Result<f64> {
    let cov = covariance_matrix(spec, obs.points())?;
    let n = obs.len() as f64;
    let quad = cov.quad_form(&obs.values_vector());
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * cov.log_det() - 0.5 * quad)
}

/// Conditional Gaussian law of the latent process at a set of targets.
#[derive(Debug, Clone)]
pub struct PosteriorGaussian {
    pub targets: Vec<f64>,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl PosteriorGaussian {
    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }
}

/// Kriging mean and covariance of the nugget-free process at `targets` given `obs`.
pub fn posterior(spec: &KernelSpec, obs: &ObservationSet, targets: &[f64]) -> Result<PosteriorGaussian> {
    if obs.is_empty() {
        return Err(Error::Validation("posterior needs at least one observation".into()));
    }
    let cov = covariance_matrix(spec, obs.points())?;
    let latent = KernelSpec { nugget: 0.0, ..*spec };
    let k_xt = cross_covariance(&latent, obs.points(), targets);
    let mut k_tt = cross_covariance(&latent, targets, targets);
    for i in 0..targets.len() {
        k_tt[(i, i)] = spec.sigma2;
    }
    let v = cov.whiten_matrix(&k_xt);
    let w = cov.whiten(&obs.values_vector());
    let mut mean = v.transpose() * w;
    let mut covariance = k_tt - v.transpose() * &v;
    covariance = (&covariance + covariance.transpose()) * 0.5;

    if spec.nugget == 0.0 {
        // Exact interpolation at targets that coincide with observation points.
        for (t, &x) in targets.iter().enumerate() {
            if let Ok(i) = obs.points().binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
                mean[t] = obs.values()[i];
                covariance.row_mut(t).fill(0.0);
                covariance.column_mut(t).fill(0.0);
            }
        }
    }
    for i in 0..targets.len() {
        if covariance[(i, i)] < 0.0 {
            covariance[(i, i)] = 0.0;
        }
    }
    Ok(PosteriorGaussian { targets: targets.to_vec(), mean, covariance })
}

/// Standardized innovations `W_i = (y_i - E[y_i | y_<i]) / sd(y_i | y_<i)` in stored point order.
///
/// With `R = L Lᵀ`, row `i` of the forward substitution `L w = y` is exactly the
/// i-th conditional step, so `Σ W_i² = yᵀ R⁻¹ y`.
pub fn sequential_decomposition(spec: &KernelSpec, obs: &ObservationSet) -> Result<Vec<f64>> {
    let cov = covariance_matrix(spec, obs.points())?;
    Ok(cov.whiten(&obs.values_vector()).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{eval_kernel, KernelFamily};

    fn inverse3(m: &DMatrix<f64>) -> DMatrix<f64> {
        // Cofactor formula.
        let a = |i: usize, j: usize| m[(i, j)];
        let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
        let cof = |i: usize, j: usize| {
            let r: Vec<usize> = (0..3).filter(|&k| k != i).collect();
            let c: Vec<usize> = (0..3).filter(|&k| k != j).collect();
            let minor = a(r[0], c[0]) * a(r[1], c[1]) - a(r[0], c[1]) * a(r[1], c[0]);
            if (i + j) % 2 == 0 { minor } else { -minor }
        };
        DMatrix::from_fn(3, 3, |i, j| cof(j, i) / det)
    }

    fn three_point() -> (KernelSpec, ObservationSet) {
        let spec = KernelSpec::matern52(2.0, 0.2).unwrap();
        let obs = ObservationSet::new(vec![0.0, 0.5, 1.0], vec![1.0, -1.0, 0.5]).unwrap();
        (spec, obs)
    }

    #[test]
    fn scalar_log_likelihoods() {
        let spec = KernelSpec::exponential(1.0, 1.0).unwrap();
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let obs = ObservationSet::new(vec![0.4], vec![0.0]).unwrap();
        assert!((log_likelihood(&spec, &obs).unwrap() + 0.5 * ln2pi).abs() < 1e-15);
        let obs = ObservationSet::new(vec![0.4], vec![2.0]).unwrap();
        assert!((log_likelihood(&spec, &obs).unwrap() - (-0.5 * ln2pi - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn three_point_log_likelihood_matches_dense_inverse() {
        let (spec, obs) = three_point();
        let p = obs.points();
        let r = DMatrix::from_fn(3, 3, |i, j| eval_kernel(&spec, (p[i] - p[j]).abs()).unwrap());
        let det = r.determinant();
        let y = obs.values_vector();
        let quad = (y.transpose() * inverse3(&r) * &y)[(0, 0)];
        let oracle = -1.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad;
        let got = log_likelihood(&spec, &obs).unwrap();
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    }

    #[test]
    fn posterior_interpolates_observations() {
        let (spec, obs) = three_point();
        let post = posterior(&spec, &obs, &[0.0, 0.25, 0.5]).unwrap();
        assert_eq!(post.mean[0], 1.0);
        assert_eq!(post.mean[2], -1.0);
        assert!(post.variance(0) <= INTERPOLATION_TOL);
        assert!(post.variance(1) > 0.0 && post.variance(1) < spec.sigma2);
    }

    #[test]
    fn two_point_kriging_closed_form() {
        let spec = KernelSpec::matern52(1.5, 0.3).unwrap();
        let obs = ObservationSet::new(vec![0.2, 0.6], vec![0.7, -0.4]).unwrap();
        let t = 0.35;
        let k = |h: f64| eval_kernel(&spec, h).unwrap();
        let (s2, c12) = (k(0.0), k(0.4));
        let (c1, c2) = (k(0.15), k(0.25));
        let det = s2 * s2 - c12 * c12;
        // [c1 c2] R⁻¹ written out with the 2×2 adjugate.
        let w1 = (c1 * s2 - c2 * c12) / det;
        let w2 = (c2 * s2 - c1 * c12) / det;
        let mean = w1 * 0.7 + w2 * -0.4;
        let var = s2 - (w1 * c1 + w2 * c2);
        let post = posterior(&spec, &obs, &[t]).unwrap();
        assert!((post.mean[0] - mean).abs() < 1e-12);
        assert!((post.variance(0) - var).abs() < 1e-12);
    }

    #[test]
    fn outside_wendland_support_posterior_is_prior() {
        let spec = KernelSpec::new(KernelFamily::Wendland { s: 1.5, mu: 3.0 }, 1.7, 0.2).unwrap();
        let obs = ObservationSet::new(vec![0.1], vec![1.3]).unwrap();
        let post = posterior(&spec, &obs, &[0.6]).unwrap();
        assert_eq!(post.mean[0], 0.0);
        assert_eq!(post.variance(0), 1.7);
    }

    #[test]
    fn sequential_decomposition_examples() {
        let spec = KernelSpec::matern52(3.0, 0.2).unwrap().with_nugget(1.0).unwrap();
        let obs = ObservationSet::new(vec![0.3], vec![2.0]).unwrap();
        let w = sequential_decomposition(&spec, &obs).unwrap();
        assert!((w[0] - 2.0 / 2.0).abs() < 1e-15);
        let spec = KernelSpec::matern52(3.0, 0.2).unwrap();
        let obs = ObservationSet::new(equispaced(10), vec![0.0; 10]).unwrap();
        assert!(sequential_decomposition(&spec, &obs).unwrap().iter().all(|w| *w == 0.0));
    }

    #[test]
    fn sequential_innovations_match_conditional_moments() {
        // W_3 from an explicit conditional of y_3 on (y_1, y_2).
        let (spec, obs) = three_point();
        let w = sequential_decomposition(&spec, &obs).unwrap();
        let head = ObservationSet::new(obs.points()[..2].to_vec(), obs.values()[..2].to_vec()).unwrap();
        let post = posterior(&spec, &head, &[1.0]).unwrap();
        let expected = (obs.values()[2] - post.mean[0]) / post.variance(0).sqrt();
        assert!((w[2] - expected).abs() < 1e-9);
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = KernelSpec::matern52(2.0, 0.2).unwrap();
        let pts = equispaced(20);
        assert_eq!(simulate_gp(&spec, &pts, 11).unwrap(), simulate_gp(&spec, &pts, 11).unwrap());
        assert_ne!(simulate_gp(&spec, &pts, 11).unwrap(), simulate_gp(&spec, &pts, 12).unwrap());
    }

    #[test]
    fn tiny_variance_simulation_is_near_zero() {
        let spec = KernelSpec::matern52(1e-16, 0.2).unwrap();
        let draws = simulate_gp(&spec, &equispaced(15), 3).unwrap();
        assert!(draws.iter().all(|v| v.abs() < 1e-7));
    }

    #[test]
    fn observation_set_validation() {
        assert!(ObservationSet::new(vec![0.5, 0.2], vec![1.0, 2.0]).is_err());
        assert!(ObservationSet::new(vec![0.5, 1.2], vec![1.0, 2.0]).is_err());
        assert!(ObservationSet::new(vec![0.5], vec![1.0, 2.0]).is_err());
        let obs = ObservationSet::from_pairs(vec![(0.9, 1.0), (0.1, 2.0)]).unwrap();
        assert_eq!(obs.points(), &[0.1, 0.9]);
        assert_eq!(obs.values(), &[2.0, 1.0]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let obs = ObservationSet::new(vec![0.0, 0.25, 1.0], vec![0.1, -3.5e-7, 2.0]).unwrap();
        obs.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y\n"));
        assert_eq!(ObservationSet::read_csv(&path).unwrap(), obs);
    }
}
