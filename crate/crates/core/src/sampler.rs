//! Gaussian vectors restricted to a polytope `lower ≤ Λx ≤ upper`.
//!
//! Rejection sampling is exact and serves as the reference; the Gibbs sampler
//! works in whitened coordinates `x = μ + S z` where each `z_j` has a standard
//! normal full conditional truncated to an interval.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constraints::{is_feasible, project_feasible, ConstraintKind, ConstraintSpec, KnotModel};
use crate::error::{Error, Result};
use crate::linalg::SqrtFactor;
use crate::rng::{self, Rng};
use crate::special::{ln_normal_sf, normal_cdf, normal_isf, normal_sf};

/// Beyond this many standard deviations the inverse CDF works on the log scale.
const LOG_SCALE_THRESHOLD: f64 = 6.0;

/// Extra sweeps allowed when a thinned Gibbs state fails the final feasibility check.
const MAX_REPAIR_SWEEPS: usize = 1000;

/// Rejection tries spent looking for a Gibbs starting point before projecting the mean.
const INIT_REJECTION_TRIES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SamplerMethod {
    Rejection { max_tries: usize },
    Gibbs { burn_in: usize, thinning: usize, chain_count: usize },
}

impl SamplerMethod {
    pub fn gibbs_default() -> Self {
        SamplerMethod::Gibbs { burn_in: 500, thinning: 5, chain_count: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    pub draws: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn rejection(draws: usize, max_tries: usize, seed: u64) -> Self {
        Self { method: SamplerMethod::Rejection { max_tries }, draws, seed }
    }

    pub fn gibbs(draws: usize, seed: u64) -> Self {
        Self { method: SamplerMethod::gibbs_default(), draws, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::Validation("draws must be at least 1".into()));
        }
        match self.method {
            SamplerMethod::Rejection { max_tries } if max_tries == 0 => {
                Err(Error::Validation("max_tries must be at least 1".into()))
            }
            SamplerMethod::Gibbs { thinning, chain_count, .. } if thinning == 0 || chain_count == 0 => {
                Err(Error::Validation("thinning and chain_count must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Draws (one per row) from a constrained Gaussian.
#[derive(Debug, Clone)]
pub struct ConstrainedSampleSet {
    pub samples: DMatrix<f64>,
    /// Accepted / tried, for rejection sampling.
    pub acceptance_rate: Option<f64>,
    /// Smallest per-coordinate effective sample size, for Gibbs sampling.
    pub effective_sample_estimate: Option<f64>,
    pub seed_used: u64,
}

impl ConstrainedSampleSet {
    pub fn draws(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.samples.row(i).iter().copied().collect()
    }

    /// One row per draw with columns `c0, c1, ...`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (0..self.dim()).map(|j| format!("c{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for row in self.samples.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// A Gaussian law `N(mean, S Sᵀ)` with its square-root factor computed once.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    factor: SqrtFactor,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: cov.nrows() });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("mean and covariance must be finite".into()));
        }
        Ok(Self { mean, factor: SqrtFactor::new(cov) })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn factor(&self) -> &SqrtFactor {
        &self.factor
    }

    /// An unconstrained draw.
    pub fn draw(&self, rng: &mut Rng) -> DVector<f64> {
        &self.mean + self.factor.apply(&standard_normal_vector(rng, self.factor.cols()))
    }
}

pub(crate) fn standard_normal_vector(rng: &mut Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Standard normal restricted to `[a, b]`, by inverse CDF.
pub fn truncated_standard_normal(rng: &mut Rng, a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return rng.sample(StandardNormal);
    }
    if a == b {
        return a;
    }
    let u: f64 = rng.random();
    let x = if a >= 0.0 {
        upper_tail_inverse(a, b, u)
    } else if b <= 0.0 {
        -upper_tail_inverse(-b, -a, u)
    } else {
        let (pa, pb) = (normal_cdf(a), normal_cdf(b));
        let p = pa + u * (pb - pa);
        if p <= 0.5 { -normal_isf(p) } else { normal_isf(1.0 - p) }
    };
    x.clamp(a, b)
}

/// Inverse of `x ↦ P(a ≤ X ≤ x | a ≤ X ≤ b)` at `u`, for `0 ≤ a < b`.
fn upper_tail_inverse(a: f64, b: f64, u: f64) -> f64 {
    if a < LOG_SCALE_THRESHOLD {
        let (qa, qb) = (normal_sf(a), normal_sf(b));
        return normal_isf(qa - u * (qa - qb));
    }
    // Q(x) = Q(a) (1 - u (1 - Q(b)/Q(a))), solved for ln Q(x) by Newton's method.
    let ln_qa = ln_normal_sf(a);
    let ratio = if b == f64::INFINITY { 0.0 } else { (ln_normal_sf(b) - ln_qa).exp() };
    let target = ln_qa + (-u * (1.0 - ratio)).ln_1p();
    let mut x = a;
    for _ in 0..100 {
        let g = ln_normal_sf(x) - target;
        // d/dx ln Q(x) = -φ(x)/Q(x)
        let ln_pdf = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let slope = -(ln_pdf - ln_normal_sf(x)).exp();
        let step = g / slope;
        x -= step;
        if step.abs() <= 1e-15 * x.abs() {
            break;
        }
    }
    x
}

/// i.i.d. draws from `N(mean, cov)` conditioned on `spec`, by rejection.
pub fn rejection_sample(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    spec: &ConstraintSpec,
    config: &SamplerConfig,
) -> Result<ConstrainedSampleSet> {
    let law = Gaussian::new(mean.clone(), cov)?;
    rejection_sample_from(&law, spec, config)
}

pub fn rejection_sample_from(law: &Gaussian, spec: &ConstraintSpec, config: &SamplerConfig) -> Result<ConstrainedSampleSet> {
    config.validate()?;
    check_dims(law, spec)?;
    let max_tries = match config.method {
        SamplerMethod::Rejection { max_tries } => max_tries,
        SamplerMethod::Gibbs { .. } => return Err(Error::Validation("rejection sampler called with a Gibbs config".into())),
    };
    let mut rng = rng::from_seed(config.seed);
    let mut samples = DMatrix::zeros(config.draws, law.dim());
    let mut total_tries = 0usize;
    for i in 0..config.draws {
        let mut accepted = false;
        for _ in 0..max_tries {
            total_tries += 1;
            let x = law.draw(&mut rng);
            if is_feasible(spec, x.as_slice())? {
                samples.row_mut(i).copy_from(&x.transpose());
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::InfeasibleSuspected { tries: total_tries, acceptance_rate: i as f64 / total_tries as f64 });
        }
    }
    Ok(ConstrainedSampleSet {
        samples,
        acceptance_rate: Some(config.draws as f64 / total_tries as f64),
        effective_sample_estimate: None,
        seed_used: config.seed,
    })
}

fn check_dims(law: &Gaussian, spec: &ConstraintSpec) -> Result<()> {
    if law.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: law.dim() });
    }
    Ok(())
}

/// Draws from `N(mean, cov)` conditioned on `spec`, by coordinate-wise Gibbs sampling.
///
/// `knots` is used to build the starting point when no quick rejection draw is found.
pub fn gibbs_sample(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    spec: &ConstraintSpec,
    knots: Option<&KnotModel>,
    config: &SamplerConfig,
) -> Result<ConstrainedSampleSet> {
    let law = Gaussian::new(mean.clone(), cov)?;
    gibbs_sample_from(&law, spec, knots, config)
}

pub fn gibbs_sample_from(
    law: &Gaussian,
    spec: &ConstraintSpec,
    knots: Option<&KnotModel>,
    config: &SamplerConfig,
) -> Result<ConstrainedSampleSet> {
    config.validate()?;
    check_dims(law, spec)?;
    let (burn_in, thinning, chains) = match config.method {
        SamplerMethod::Gibbs { burn_in, thinning, chain_count } => (burn_in, thinning, chain_count),
        SamplerMethod::Rejection { .. } => return Err(Error::Validation("Gibbs sampler called with a rejection config".into())),
    };
    let mut chain = WhitenedChain::new(law, spec);
    let mut samples = DMatrix::zeros(config.draws, law.dim());
    let mut row = 0;
    for c in 0..chains {
        let per_chain = config.draws / chains + usize::from(c < config.draws % chains);
        let mut rng = rng::stream(config.seed, c as u64);
        chain.initialize(&mut rng, knots)?;
        for _ in 0..burn_in {
            chain.sweep(&mut rng);
        }
        for _ in 0..per_chain {
            for _ in 0..thinning {
                chain.sweep(&mut rng);
            }
            let x = chain.feasible_state(&mut rng)?;
            samples.row_mut(row).copy_from(&x.transpose());
            row += 1;
        }
    }
    let ess = (0..samples.ncols())
        .map(|j| effective_sample_size(samples.column(j).as_slice()))
        .fold(f64::INFINITY, f64::min);
    Ok(ConstrainedSampleSet {
        samples,
        acceptance_rate: None,
        effective_sample_estimate: Some(if ess.is_finite() { ess } else { config.draws as f64 }),
        seed_used: config.seed,
    })
}

/// Gibbs state in whitened coordinates: `x = μ + S z`, `v = Λ x`.
struct WhitenedChain<'a> {
    law: &'a Gaussian,
    spec: &'a ConstraintSpec,
    /// `G = Λ S`, stored column-major so a column is a contiguous slice.
    g: DMatrix<f64>,
    lambda_mean: Vec<f64>,
    z: Vec<f64>,
    v: Vec<f64>,
}

impl<'a> WhitenedChain<'a> {
    fn new(law: &'a Gaussian, spec: &'a ConstraintSpec) -> Self {
        let s = law.factor().matrix();
        let cols = law.factor().cols();
        let mut g = DMatrix::zeros(spec.n_rows(), cols);
        for r in 0..spec.n_rows() {
            for (k, a) in spec.row_entries(r) {
                for j in 0..cols {
                    g[(r, j)] += a * s[(k, j)];
                }
            }
        }
        let lambda_mean = spec.apply(law.mean().as_slice());
        Self { law, spec, g, lambda_mean, z: vec![0.0; cols], v: Vec::new() }
    }

    fn set_z(&mut self, z: Vec<f64>) {
        self.z = z;
        self.refresh();
    }

    fn refresh(&mut self) {
        let z = DVector::from_column_slice(&self.z);
        let gz = &self.g * z;
        self.v = self.lambda_mean.iter().zip(gz.iter()).map(|(a, b)| a + b).collect();
    }

    fn state(&self) -> DVector<f64> {
        self.law.mean() + self.law.factor().apply(&DVector::from_column_slice(&self.z))
    }

    fn state_is_feasible(&self) -> bool {
        is_feasible(self.spec, self.state().as_slice()).unwrap_or(false)
    }

    fn initialize(&mut self, rng: &mut Rng, knots: Option<&KnotModel>) -> Result<()> {
        let dim = self.law.factor().cols();
        for _ in 0..INIT_REJECTION_TRIES {
            let z: Vec<f64> = standard_normal_vector(rng, dim).iter().copied().collect();
            self.set_z(z);
            if self.state_is_feasible() {
                return Ok(());
            }
        }
        let start = interior_start(self.spec, knots, self.law.mean().as_slice())?;
        let offset = DVector::from_vec(start) - self.law.mean();
        let z = self.law.factor().preimage(&offset);
        self.set_z(z.iter().copied().collect());
        if self.state_is_feasible() {
            Ok(())
        } else {
            Err(Error::Initialization)
        }
    }

    fn sweep(&mut self, rng: &mut Rng) {
        let (rows, dim) = self.g.shape();
        let lower = self.spec.lower();
        let upper = self.spec.upper();
        for j in 0..dim {
            let col = &self.g.as_slice()[j * rows..(j + 1) * rows];
            let zj = self.z[j];
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for r in 0..rows {
                let gr = col[r];
                if gr == 0.0 {
                    continue;
                }
                let rest = self.v[r] - gr * zj;
                let (a, b) = ((lower[r] - rest) / gr, (upper[r] - rest) / gr);
                let (a, b) = if gr > 0.0 { (a, b) } else { (b, a) };
                lo = lo.max(a);
                hi = hi.min(b);
            }
            if !(lo <= hi) {
                // Round-off left the state marginally outside the polytope; keep z_j.
                continue;
            }
            let new = truncated_standard_normal(rng, lo, hi);
            let delta = new - zj;
            if delta != 0.0 {
                for r in 0..rows {
                    self.v[r] += col[r] * delta;
                }
                self.z[j] = new;
            }
        }
    }

    /// Current state, sweeping further if accumulated round-off made it infeasible.
    fn feasible_state(&mut self, rng: &mut Rng) -> Result<DVector<f64>> {
        for _ in 0..MAX_REPAIR_SWEEPS {
            self.refresh();
            let x = self.state();
            if is_feasible(self.spec, x.as_slice())? {
                return Ok(x);
            }
            self.sweep(rng);
        }
        Err(Error::Initialization)
    }
}

/// A strictly interior point near `mean`, from the least-squares projection.
fn interior_start(spec: &ConstraintSpec, knots: Option<&KnotModel>, mean: &[f64]) -> Result<Vec<f64>> {
    let m = mean.len();
    let default_knots;
    let knots = match knots {
        Some(k) => k,
        None => {
            default_knots = KnotModel::equispaced(m.max(2))?;
            &default_knots
        }
    };
    let mut p = project_feasible(spec, knots, mean)?;
    let scale = mean.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let eps = 1e-6 * scale;
    let t = knots.knots();
    match spec.kind() {
        ConstraintKind::Bounds { lower, upper } => {
            let width = upper - lower;
            let margin = if width.is_finite() { (0.25 * width).min(eps) } else { eps };
            for v in &mut p {
                *v = v.clamp(lower + margin, upper - margin);
            }
        }
        ConstraintKind::Monotone => {
            for (v, x) in p.iter_mut().zip(t) {
                *v += eps * x;
            }
        }
        ConstraintKind::Convex => {
            for (v, x) in p.iter_mut().zip(t) {
                *v += eps * (x - 0.5) * (x - 0.5);
            }
        }
    }
    Ok(p)
}

/// Rejection sampling when it succeeds within `max_tries` per draw, Gibbs otherwise.
pub fn sample_auto(
    law: &Gaussian,
    spec: &ConstraintSpec,
    knots: Option<&KnotModel>,
    draws: usize,
    max_tries: usize,
    seed: u64,
) -> Result<ConstrainedSampleSet> {
    match rejection_sample_from(law, spec, &SamplerConfig::rejection(draws, max_tries, seed)) {
        Err(Error::InfeasibleSuspected { .. }) => gibbs_sample_from(law, spec, knots, &SamplerConfig::gibbs(draws, seed)),
        other => other,
    }
}

/// Effective sample size of a scalar chain (Geyer's initial positive sequence).
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| centered.iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * c0);
    let mut sum = 0.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = acf(2 * k) + acf(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}

/// Monte-Carlo estimate of `P(X ∈ spec)` for `X ~ N(mean, cov)`; exactly 1 for vacuous constraints.
pub fn constraint_probability(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    spec: &ConstraintSpec,
    n_sim: usize,
    seed: u64,
) -> Result<f64> {
    if n_sim == 0 {
        return Err(Error::Validation("n_sim must be at least 1".into()));
    }
    if spec.is_vacuous() {
        return Ok(1.0);
    }
    let law = Gaussian::new(mean.clone(), cov)?;
    check_dims(&law, spec)?;
    let mut rng = rng::from_seed(seed);
    let mut hits = 0usize;
    for _ in 0..n_sim {
        if is_feasible(spec, law.draw(&mut rng).as_slice())? {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_sim as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::build_constraints;

    fn bounds(m: usize, lower: f64, upper: f64) -> ConstraintSpec {
        ConstraintSpec::bounds(m, lower, upper).unwrap()
    }

    fn column_mean(s: &DMatrix<f64>, j: usize) -> f64 {
        s.column(j).mean()
    }

    /// CDF of N(0,1) truncated to [a, b], from statrs.
    fn truncated_cdf(a: f64, b: f64, x: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        (n.cdf(x) - n.cdf(a)) / (n.cdf(b) - n.cdf(a))
    }

    fn ks_statistic(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = draws.len() as f64;
        draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn truncated_normal_matches_analytic_cdf() {
        for &(a, b) in &[(-1.0, 2.0), (0.5, 1.5), (-3.0, -2.5), (1.0, f64::INFINITY), (f64::NEG_INFINITY, -0.3), (-0.1, 0.1)] {
            let mut rng = rng::from_seed(17);
            let draws: Vec<f64> = (0..10_000).map(|_| truncated_standard_normal(&mut rng, a, b)).collect();
            assert!(draws.iter().all(|x| (a..=b).contains(x)));
            let ks = ks_statistic(draws, |x| truncated_cdf(a, b, x));
            assert!(ks < 0.02, "[{a}, {b}]: KS = {ks}");
        }
    }

    #[test]
    fn far_tail_truncation_matches_asymptotic_cdf() {
        // P(X > x | X > a) from the Mills-ratio expansion, accurate to ~1e-6 here.
        let tail = |x: f64, a: f64| {
            let series = |t: f64| 1.0 - 1.0 / (t * t) + 3.0 / t.powi(4) - 15.0 / t.powi(6);
            (-(x * x - a * a) / 2.0).exp() * (a / x) * series(x) / series(a)
        };
        for &a in &[8.0, 25.0, 60.0] {
            let mut rng = rng::from_seed(3);
            let draws: Vec<f64> = (0..10_000).map(|_| truncated_standard_normal(&mut rng, a, f64::INFINITY)).collect();
            assert!(draws.iter().all(|x| x.is_finite() && *x >= a));
            let ks = ks_statistic(draws, |x| 1.0 - tail(x, a));
            assert!(ks < 0.02, "a={a}: KS = {ks}");
            let mut rng = rng::from_seed(4);
            let neg: Vec<f64> = (0..1000).map(|_| truncated_standard_normal(&mut rng, -a - 1.0, -a)).collect();
            assert!(neg.iter().all(|x| (-a - 1.0..=-a).contains(x)));
        }
    }

    #[test]
    fn rejection_half_normal() {
        let spec = bounds(2, 0.0, f64::INFINITY);
        let cfg = SamplerConfig::rejection(20_000, 1000, 5);
        let set = rejection_sample(&DVector::zeros(2), &DMatrix::identity(2, 2), &spec, &cfg).unwrap();
        let target = (2.0 / std::f64::consts::PI).sqrt();
        let se = (1.0 - 2.0 / std::f64::consts::PI).sqrt() / (20_000f64).sqrt();
        for j in 0..2 {
            assert!((column_mean(&set.samples, j) - target).abs() < 3.0 * se);
        }
        // Both coordinates positive: probability 1/4.
        assert!((set.acceptance_rate.unwrap() - 0.25).abs() < 0.01);
    }

    #[test]
    fn rejection_acceptance_rates() {
        let half = bounds(1, 0.0, f64::INFINITY);
        let cfg = SamplerConfig::rejection(5_000, 100, 9);
        let set = rejection_sample(&DVector::zeros(1), &DMatrix::identity(1, 1), &half, &cfg).unwrap();
        assert!((set.acceptance_rate.unwrap() - 0.5).abs() < 0.02);
        let none = bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        let set = rejection_sample(&DVector::zeros(1), &DMatrix::identity(1, 1), &none, &cfg).unwrap();
        assert_eq!(set.acceptance_rate, Some(1.0));
    }

    #[test]
    fn rejection_reports_infeasibility() {
        let spec = bounds(1, 50.0, 51.0);
        let cfg = SamplerConfig::rejection(1, 1000, 1);
        let err = rejection_sample(&DVector::zeros(1), &DMatrix::identity(1, 1), &spec, &cfg).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSuspected { tries: 1000, acceptance_rate } if acceptance_rate == 0.0));
    }

    #[test]
    fn gibbs_vacuous_matches_gaussian_moments() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
        let mean = DVector::from_vec(vec![1.0, -1.0]);
        let spec = bounds(2, f64::NEG_INFINITY, f64::INFINITY);
        let set = gibbs_sample(&mean, &cov, &spec, None, &SamplerConfig::gibbs(5000, 8)).unwrap();
        for j in 0..2 {
            let se = (cov[(j, j)] / 5000.0).sqrt();
            assert!((column_mean(&set.samples, j) - mean[j]).abs() < 3.0 * se);
        }
    }

    #[test]
    fn gibbs_rows_are_feasible_and_deterministic() {
        let cov = DMatrix::from_fn(4, 4, |i, j| (-((i as f64 - j as f64).abs()) / 2.0).exp());
        let mean = DVector::from_vec(vec![0.5, -0.2, 0.1, 2.0]);
        let k = KnotModel::equispaced(4).unwrap();
        for kind in [ConstraintKind::Monotone, ConstraintKind::Convex, ConstraintKind::Bounds { lower: -0.5, upper: 0.5 }] {
            let spec = build_constraints(kind, &k).unwrap();
            let cfg = SamplerConfig::gibbs(300, 21);
            let a = gibbs_sample(&mean, &cov, &spec, Some(&k), &cfg).unwrap();
            let b = gibbs_sample(&mean, &cov, &spec, Some(&k), &cfg).unwrap();
            assert_eq!(a.samples, b.samples);
            for i in 0..a.draws() {
                assert!(is_feasible(&spec, &a.row(i)).unwrap(), "{kind:?}");
            }
        }
    }

    #[test]
    fn gibbs_starts_from_projection_when_rejection_fails() {
        // Mean far outside a thin box: rejection draws never land inside.
        let spec = bounds(3, 10.0, 10.5);
        let cfg = SamplerConfig::gibbs(200, 2);
        let set = gibbs_sample(&DVector::zeros(3), &DMatrix::identity(3, 3), &spec, None, &cfg).unwrap();
        for i in 0..set.draws() {
            assert!(is_feasible(&spec, &set.row(i)).unwrap());
        }
    }

    #[test]
    fn gibbs_handles_singular_covariance() {
        // Rank-one covariance: all coordinates equal.
        let cov = DMatrix::from_element(3, 3, 1.0);
        let spec = bounds(3, -0.5, f64::INFINITY);
        let set = gibbs_sample(&DVector::zeros(3), &cov, &spec, None, &SamplerConfig::gibbs(500, 6)).unwrap();
        for i in 0..set.draws() {
            assert!(is_feasible(&spec, &set.row(i)).unwrap());
        }
    }

    #[test]
    fn auto_falls_back_to_gibbs() {
        let law = Gaussian::new(DVector::zeros(2), &DMatrix::identity(2, 2)).unwrap();
        let easy = sample_auto(&law, &bounds(2, -3.0, 3.0), None, 10, 100, 1).unwrap();
        assert!(easy.acceptance_rate.is_some());
        let hard = sample_auto(&law, &bounds(2, 8.0, 9.0), None, 10, 100, 1).unwrap();
        assert!(hard.effective_sample_estimate.is_some());
        for i in 0..10 {
            assert!(hard.row(i).iter().all(|v| (8.0..=9.0).contains(v)));
        }
    }

    #[test]
    fn constraint_probability_examples() {
        let id = DMatrix::identity(1, 1);
        let zero = DVector::zeros(1);
        let half = bounds(1, 0.0, f64::INFINITY);
        let p = constraint_probability(&zero, &id, &half, 100_000, 1).unwrap();
        assert!((p - 0.5).abs() < 0.005);
        let none = bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        assert_eq!(constraint_probability(&zero, &id, &none, 1, 1).unwrap(), 1.0);
        let thin = bounds(1, -1e-9, 1e-9);
        assert!(constraint_probability(&zero, &id, &thin, 10_000, 1).unwrap() < 1e-3);
        assert!(constraint_probability(&zero, &id, &half, 0, 1).is_err());
    }

    #[test]
    fn effective_sample_size_of_iid_and_sticky_chains() {
        let mut rng = rng::from_seed(1);
        let iid: Vec<f64> = (0..4000).map(|_| rng.sample(StandardNormal)).collect();
        let ess = effective_sample_size(&iid);
        assert!(ess > 3000.0, "{ess}");
        let mut x = 0.0;
        let ar: Vec<f64> = (0..4000)
            .map(|_| {
                x = 0.95 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        // AR(1) with φ = 0.95: n (1-φ)/(1+φ) ≈ 103.
        let ess = effective_sample_size(&ar);
        assert!(ess > 40.0 && ess < 250.0, "{ess}");
    }

    #[test]
    fn sample_set_csv_has_one_row_per_draw() {
        let spec = bounds(2, -1.0, 1.0);
        let set = rejection_sample(&DVector::zeros(2), &DMatrix::identity(2, 2), &spec, &SamplerConfig::rejection(7, 100, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        set.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert_eq!(text.lines().next().unwrap(), "c0,c1");
    }
}
