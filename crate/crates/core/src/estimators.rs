//! Grid maximum-likelihood estimators, unconstrained and constrained.
//!
//! The constrained log-likelihood is `L_c = L + A + B` with
//! `A = -ln P(Y_m ∈ E')` and `B = ln P(Y_m ∈ E' | y)`, both estimated by
//! Monte Carlo with common random numbers along each σ² column.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::constraints::{ConstraintSpec, KnotModel};
use crate::error::{Error, Result};
use crate::gp::{posterior, ObservationSet};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::linalg::{covariance_matrix, cross_covariance, SqrtFactor};
use crate::rng;
use crate::sampler::standard_normal_vector;

/// Candidate parameter values: one strictly increasing σ² row per ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationGrid {
    rho_values: Vec<f64>,
    sigma2_rows: Vec<Vec<f64>>,
}

fn check_increasing_positive(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Validation(format!("{what} grid is empty")));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Validation(format!("{what} grid values must be positive and finite")));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Validation(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

impl EstimationGrid {
    pub fn new(rho_values: Vec<f64>, sigma2_rows: Vec<Vec<f64>>) -> Result<Self> {
        check_increasing_positive(&rho_values, "rho")?;
        if sigma2_rows.len() != rho_values.len() {
            return Err(Error::DimensionMismatch { expected: rho_values.len(), got: sigma2_rows.len() });
        }
        for row in &sigma2_rows {
            check_increasing_positive(row, "sigma2")?;
        }
        Ok(Self { rho_values, sigma2_rows })
    }

    /// The same σ² values for every ρ.
    pub fn rectangular(sigma2_values: Vec<f64>, rho_values: Vec<f64>) -> Result<Self> {
        let rows = vec![sigma2_values; rho_values.len()];
        Self::new(rho_values, rows)
    }

    /// `count` equispaced σ² values in `(1 ± 4√(2/n)) σ₀²` at a single ρ.
    ///
    /// Non-positive values (possible when n < 32) are dropped.
    pub fn variance(sigma2_center: f64, n: usize, count: usize, rho: f64) -> Result<Self> {
        let half = 4.0 * (2.0 / n as f64).sqrt();
        let values: Vec<f64> = linspace((1.0 - half) * sigma2_center, (1.0 + half) * sigma2_center, count)
            .into_iter()
            .filter(|v| *v > 0.0)
            .collect();
        Self::rectangular(values, vec![rho])
    }

    /// ρ equispaced in `[rho_lo, rho_hi]`; for each ρ, σ² = ρ^e · c with `c` equispaced
    /// within four asymptotic standard deviations `√2 c₀/√n` of the microergodic value `c₀`.
    pub fn microergodic(
        microergodic_center: f64,
        exponent: f64,
        n: usize,
        (rho_lo, rho_hi): (f64, f64),
        n_rho: usize,
        n_sigma2: usize,
    ) -> Result<Self> {
        let half = 4.0 * 2f64.sqrt() / (n as f64).sqrt();
        let c_values: Vec<f64> =
            linspace((1.0 - half) * microergodic_center, (1.0 + half) * microergodic_center, n_sigma2)
                .into_iter()
                .filter(|v| *v > 0.0)
                .collect();
        let rho_values = linspace(rho_lo, rho_hi, n_rho);
        let rows = rho_values.iter().map(|r| c_values.iter().map(|c| c * r.powf(exponent)).collect()).collect();
        Self::new(rho_values, rows)
    }

    pub fn rho_values(&self) -> &[f64] {
        &self.rho_values
    }

    pub fn sigma2_row(&self, r: usize) -> &[f64] {
        &self.sigma2_rows[r]
    }

    pub fn len(&self) -> usize {
        self.sigma2_rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Monte-Carlo sizes and seed for the constraint-probability terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    /// Prior draws per ρ for A.
    pub n_an: usize,
    /// Posterior draws per ρ for B.
    pub n_bn: usize,
    pub seed: u64,
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub sigma2: f64,
    pub rho: f64,
    pub delta2: Option<f64>,
    pub log_likelihood: f64,
    pub an: f64,
    pub bn: f64,
    /// `None` when the point is excluded (infinite A or B, or a failed factorization).
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Grid points whose objective equals the maximum, other than the chosen one.
    pub ties: usize,
    /// Whether the argmax lies on the edge of the grid in σ² (or δ²).
    pub sigma2_boundary_hit: bool,
    pub rho_boundary_hit: bool,
    /// Points excluded because a probability estimate was zero.
    pub excluded_points: usize,
    /// ρ values skipped because the covariance could not be factorized.
    pub failed_rho: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub sigma2_hat: f64,
    pub rho_hat: f64,
    pub microergodic_hat: f64,
    pub delta2_hat: Option<f64>,
    pub surface: Vec<SurfacePoint>,
    pub an_draws: usize,
    pub bn_draws: usize,
    pub seed: u64,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    pub fn write_surface_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "sigma2,rho,delta2,log_likelihood,an,bn,objective")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for p in &self.surface {
            writeln!(
                out,
                "{:e},{:e},{},{:e},{:e},{:e},{}",
                p.sigma2,
                p.rho,
                opt(p.delta2),
                p.log_likelihood,
                p.an,
                p.bn,
                opt(p.objective)
            )?;
        }
        out.flush()?;
        Ok(())
    }

    /// Estimates and diagnostics, without the surface.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sigma2_hat": self.sigma2_hat,
            "rho_hat": self.rho_hat,
            "microergodic_hat": self.microergodic_hat,
            "delta2_hat": self.delta2_hat,
            "an_draws": self.an_draws,
            "bn_draws": self.bn_draws,
            "seed": self.seed,
            "diagnostics": self.diagnostics,
        })
    }
}

fn microergodic_of(family: KernelFamily, sigma2: f64, rho: f64) -> f64 {
    sigma2 / rho.powf(family.microergodic_exponent())
}

/// `yᵀR⁻¹y` and `ln|R|` for the unit-variance correlation matrix at `rho`.
fn correlation_terms(family: KernelFamily, rho: f64, obs: &ObservationSet) -> Result<(f64, f64)> {
    let spec = KernelSpec::new(family, 1.0, rho)?;
    let cov = covariance_matrix(&spec, obs.points())?;
    Ok((cov.quad_form(&obs.values_vector()), cov.log_det()))
}

/// `L(σ²) = -n/2 ln 2π - n/2 ln σ² - ½ ln|R| - q / (2σ²)`.
fn scaled_log_likelihood(n: usize, sigma2: f64, log_det_r: f64, quad_r: f64) -> f64 {
    let n = n as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * n * sigma2.ln() - 0.5 * log_det_r - 0.5 * quad_r / sigma2
}

/// Closed-form variance MLE `yᵀR⁻¹y / n` for a unit-variance correlation kernel.
pub fn mle_variance(obs: &ObservationSet, correlation: &KernelSpec) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::Validation("mle_variance needs at least one observation".into()));
    }
    let spec = correlation.correlation();
    let cov = covariance_matrix(&spec, obs.points())?;
    Ok(cov.quad_form(&obs.values_vector()) / obs.len() as f64)
}

/// Profiled variance `σ̄²(ρ) = yᵀR_ρ⁻¹y / n` at each ρ.
pub fn profile_variance(obs: &ObservationSet, family: KernelFamily, rho_values: &[f64]) -> Result<Vec<f64>> {
    rho_values.iter().map(|&rho| mle_variance(obs, &KernelSpec::new(family, 1.0, rho)?)).collect()
}

/// Profile-likelihood MLE over ρ with σ̄²(ρ) clamped to `sigma2_box`.
pub fn mle_profile(
    obs: &ObservationSet,
    family: KernelFamily,
    rho_values: &[f64],
    sigma2_box: (f64, f64),
) -> Result<EstimationResult> {
    check_increasing_positive(rho_values, "rho")?;
    let (lo, hi) = sigma2_box;
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::Validation(format!("invalid sigma2 box [{lo}, {hi}]")));
    }
    let n = obs.len();
    let mut surface = Vec::with_capacity(rho_values.len());
    let mut diagnostics = Diagnostics::default();
    for &rho in rho_values {
        match correlation_terms(family, rho, obs) {
            Ok((q, log_det)) => {
                let sigma2 = (q / n as f64).clamp(lo, hi);
                let l = scaled_log_likelihood(n, sigma2, log_det, q);
                surface.push(SurfacePoint { sigma2, rho, delta2: None, log_likelihood: l, an: 0.0, bn: 0.0, objective: Some(l) });
            }
            Err(e) if e.is_numerical() => diagnostics.failed_rho += 1,
            Err(e) => return Err(e),
        }
    }
    let best = argmax(&surface, &mut diagnostics)?;
    let p = surface[best];
    diagnostics.rho_boundary_hit = rho_values.len() > 1 && (p.rho == rho_values[0] || p.rho == rho_values[rho_values.len() - 1]);
    diagnostics.sigma2_boundary_hit = p.sigma2 == lo || p.sigma2 == hi;
    Ok(EstimationResult {
        sigma2_hat: p.sigma2,
        rho_hat: p.rho,
        microergodic_hat: microergodic_of(family, p.sigma2, p.rho),
        delta2_hat: None,
        surface,
        an_draws: 0,
        bn_draws: 0,
        seed: 0,
        diagnostics,
    })
}

/// Index of the first maximal objective in surface order (σ² ascending within ρ ascending).
fn argmax(surface: &[SurfacePoint], diagnostics: &mut Diagnostics) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in surface.iter().enumerate() {
        if let Some(v) = p.objective {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    let (index, value) = best.ok_or_else(|| Error::EstimationFailed("every grid point was excluded".into()))?;
    diagnostics.ties = surface.iter().filter(|p| p.objective == Some(value)).count() - 1;
    Ok(index)
}

/// Set of scales `t ≥ 0` with `offset + t·draw` feasible, for each draw.
fn scale_intervals(spec: &ConstraintSpec, offset: &[f64], draws: &[DVector<f64>]) -> Result<Vec<Option<(f64, f64)>>> {
    draws.iter().map(|z| spec.scale_interval(offset, z.as_slice())).collect()
}

/// Fraction of intervals containing `t`.
fn coverage(intervals: &[Option<(f64, f64)>], t: f64) -> f64 {
    let hits = intervals.iter().filter(|iv| matches!(iv, Some((lo, hi)) if *lo <= t && t <= *hi)).count();
    hits as f64 / intervals.len() as f64
}

/// `-ln P(σ Z ∈ E')` along `sigma2_values`, with `Z` drawn from the unit-variance prior at the knots.
///
/// The same draws are used for every σ²; `+∞` marks a zero estimate.
pub fn an_curve(
    correlation: &KernelSpec,
    knots: &KnotModel,
    constraint: &ConstraintSpec,
    sigma2_values: &[f64],
    n_sim: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_sim == 0 {
        return Err(Error::Validation("n_sim must be at least 1".into()));
    }
    if constraint.dim() != knots.m() {
        return Err(Error::DimensionMismatch { expected: knots.m(), got: constraint.dim() });
    }
    if constraint.is_vacuous() {
        return Ok(vec![0.0; sigma2_values.len()]);
    }
    let corr = correlation.correlation();
    let prior = cross_covariance(&corr, knots.knots(), knots.knots());
    let factor = SqrtFactor::new(&prior);
    let mut rng = rng::from_seed(seed);
    let draws: Vec<DVector<f64>> =
        (0..n_sim).map(|_| factor.apply(&standard_normal_vector(&mut rng, factor.cols()))).collect();
    let intervals = scale_intervals(constraint, &vec![0.0; knots.m()], &draws)?;
    Ok(sigma2_values
        .iter()
        .map(|s2| {
            let p = coverage(&intervals, s2.sqrt());
            if p == 0.0 { f64::INFINITY } else { -p.ln() }
        })
        .collect())
}

/// `A = -ln P(Y_m ∈ E')` under `spec` (nugget ignored); `+∞` when no draw is feasible.
pub fn estimate_an(
    spec: &KernelSpec,
    knots: &KnotModel,
    constraint: &ConstraintSpec,
    n_sim: usize,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    Ok(an_curve(spec, knots, constraint, &[spec.sigma2], n_sim, seed)?[0])
}

/// Kriging mean at the knots and draws from the unit-variance posterior covariance.
fn posterior_draws(
    correlation: &KernelSpec,
    obs: &ObservationSet,
    knots: &KnotModel,
    n_t: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let post = posterior(&correlation.correlation(), obs, knots.knots())?;
    let factor = SqrtFactor::new(&post.covariance);
    let mut rng = rng::from_seed(seed);
    let draws = (0..n_t).map(|_| factor.apply(&standard_normal_vector(&mut rng, factor.cols()))).collect();
    Ok((post.mean.iter().copied().collect(), draws))
}

/// `ln` of the fraction of `mean + σ Z_i` in the constraint set, along `sigma2_values`.
///
/// `mean` and the `Z_i` come from the unit-variance posterior at the knots; `-∞` marks a zero fraction.
pub fn bn_curve(
    correlation: &KernelSpec,
    obs: &ObservationSet,
    knots: &KnotModel,
    constraint: &ConstraintSpec,
    sigma2_values: &[f64],
    n_t: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_t == 0 {
        return Err(Error::Validation("n_t must be at least 1".into()));
    }
    if constraint.dim() != knots.m() {
        return Err(Error::DimensionMismatch { expected: knots.m(), got: constraint.dim() });
    }
    if constraint.is_vacuous() {
        return Ok(vec![0.0; sigma2_values.len()]);
    }
    let (mean, draws) = posterior_draws(correlation, obs, knots, n_t, seed)?;
    Ok(bn_from_draws(constraint, &mean, &draws, sigma2_values))
}

fn bn_from_draws(constraint: &ConstraintSpec, mean: &[f64], draws: &[DVector<f64>], sigma2_values: &[f64]) -> Vec<f64> {
    let intervals = scale_intervals(constraint, mean, draws).expect("dimensions checked by caller");
    sigma2_values
        .iter()
        .map(|s2| {
            let p = coverage(&intervals, s2.sqrt());
            if p == 0.0 { f64::NEG_INFINITY } else { p.ln() }
        })
        .collect()
}

/// `B = ln P(Y_m ∈ E' | y)` at `spec.sigma2`; `-∞` when no draw is feasible.
pub fn estimate_bn(
    spec: &KernelSpec,
    obs: &ObservationSet,
    knots: &KnotModel,
    constraint: &ConstraintSpec,
    n_t: usize,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    Ok(bn_curve(spec, obs, knots, constraint, &[spec.sigma2], n_t, seed)?[0])
}

/// Precomputed A values, one row per ρ of a grid; they do not depend on the data.
#[derive(Debug, Clone, PartialEq)]
pub struct AnTable {
    rows: Vec<Vec<f64>>,
    draws: usize,
}

impl AnTable {
    /// Draws for ρ index `r` come from stream `r` of `seed`.
    pub fn compute(
        family: KernelFamily,
        grid: &EstimationGrid,
        knots: &KnotModel,
        constraint: &ConstraintSpec,
        n_sim: usize,
        seed: u64,
    ) -> Result<Self> {
        let rows = grid
            .rho_values()
            .iter()
            .enumerate()
            .map(|(r, &rho)| {
                let spec = KernelSpec::new(family, 1.0, rho)?;
                an_curve(&spec, knots, constraint, grid.sigma2_row(r), n_sim, rng::derive_seed(seed, r as u64))
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows, draws: n_sim })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }
}

/// Grid maximizer of `L`, or of `L + A + B` when a constraint is given.
///
/// With a constraint, posterior draws for ρ index `r` use stream `derive_seed(mc.seed, r)`
/// and are shared along that σ² row. `an` may supply A values computed once for many datasets.
pub fn grid_estimate(
    obs: &ObservationSet,
    family: KernelFamily,
    grid: &EstimationGrid,
    constrained: Option<(&ConstraintSpec, &KnotModel)>,
    mc: &McConfig,
    an: Option<&AnTable>,
) -> Result<EstimationResult> {
    if obs.is_empty() {
        return Err(Error::Validation("estimation needs at least one observation".into()));
    }
    let n = obs.len();
    let mut diagnostics = Diagnostics::default();
    let mut surface = Vec::with_capacity(grid.len());
    let own_an;
    let an = match (constrained, an) {
        (Some(_), Some(table)) => {
            if table.rows.len() != grid.rho_values().len() {
                return Err(Error::DimensionMismatch { expected: grid.rho_values().len(), got: table.rows.len() });
            }
            Some(table)
        }
        (Some((constraint, knots)), None) => {
            own_an = AnTable::compute(family, grid, knots, constraint, mc.n_an, mc.seed ^ AN_SEED_SALT)?;
            Some(&own_an)
        }
        (None, _) => None,
    };
    for (r, &rho) in grid.rho_values().iter().enumerate() {
        let row = grid.sigma2_row(r);
        let (q, log_det) = match correlation_terms(family, rho, obs) {
            Ok(t) => t,
            Err(e) if e.is_numerical() => {
                diagnostics.failed_rho += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (an_row, bn_row) = match (constrained, an) {
            (Some((constraint, knots)), Some(table)) => {
                let spec = KernelSpec::new(family, 1.0, rho)?;
                let bn = bn_curve(&spec, obs, knots, constraint, row, mc.n_bn, rng::derive_seed(mc.seed, r as u64))?;
                (table.row(r).to_vec(), bn)
            }
            _ => (vec![0.0; row.len()], vec![0.0; row.len()]),
        };
        for (k, &sigma2) in row.iter().enumerate() {
            let l = scaled_log_likelihood(n, sigma2, log_det, q);
            let (a, b) = (an_row[k], bn_row[k]);
            let objective = if a.is_finite() && b.is_finite() {
                Some(l + a + b)
            } else {
                diagnostics.excluded_points += 1;
                None
            };
            surface.push(SurfacePoint { sigma2, rho, delta2: None, log_likelihood: l, an: a, bn: b, objective });
        }
    }
    let best = argmax(&surface, &mut diagnostics)?;
    let p = surface[best];
    let r = grid.rho_values().iter().position(|&v| v == p.rho).expect("rho from grid");
    let row = grid.sigma2_row(r);
    diagnostics.sigma2_boundary_hit = row.len() > 1 && (p.sigma2 == row[0] || p.sigma2 == row[row.len() - 1]);
    diagnostics.rho_boundary_hit = grid.rho_values().len() > 1 && (r == 0 || r == grid.rho_values().len() - 1);
    Ok(EstimationResult {
        sigma2_hat: p.sigma2,
        rho_hat: p.rho,
        microergodic_hat: microergodic_of(family, p.sigma2, p.rho),
        delta2_hat: None,
        surface,
        an_draws: if constrained.is_some() { an.map_or(0, |t| t.draws) } else { 0 },
        bn_draws: if constrained.is_some() { mc.n_bn } else { 0 },
        seed: mc.seed,
        diagnostics,
    })
}

/// Keeps the A draws independent of the B draws when both derive from one seed.
const AN_SEED_SALT: u64 = 0x5eed_a11c_e000_0001;

/// Unconstrained grid maximizer of `L`.
pub fn mle_grid(obs: &ObservationSet, family: KernelFamily, grid: &EstimationGrid) -> Result<EstimationResult> {
    grid_estimate(obs, family, grid, None, &McConfig { n_an: 0, n_bn: 0, seed: 0 }, None)
}

/// Constrained MLE of σ² at a fixed ρ over `sigma2_values`.
#[allow(clippy::too_many_arguments)]
pub fn cmle_fixed_rho(
    obs: &ObservationSet,
    family: KernelFamily,
    rho: f64,
    sigma2_values: Vec<f64>,
    constraint: &ConstraintSpec,
    knots: &KnotModel,
    mc: &McConfig,
    an: Option<&AnTable>,
) -> Result<EstimationResult> {
    let grid = EstimationGrid::rectangular(sigma2_values, vec![rho])?;
    grid_estimate(obs, family, &grid, Some((constraint, knots)), mc, an)
}

/// Constrained MLE of (σ², ρ) over a grid.
pub fn cmle_joint(
    obs: &ObservationSet,
    family: KernelFamily,
    grid: &EstimationGrid,
    constraint: &ConstraintSpec,
    knots: &KnotModel,
    mc: &McConfig,
    an: Option<&AnTable>,
) -> Result<EstimationResult> {
    grid_estimate(obs, family, grid, Some((constraint, knots)), mc, an)
}

/// Eigendecompositions of exponential correlation matrices at fixed design points.
///
/// With `A_ρ = U diag(λ) Uᵀ`, the noisy covariance `σ²A_ρ + δ²I` has eigenvalues
/// `σ²λ + δ²` in the same basis, so each grid point costs O(n).
#[derive(Debug, Clone)]
pub struct NoisyBasis {
    points: Vec<f64>,
    rho_values: Vec<f64>,
    bases: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl NoisyBasis {
    pub fn new(points: &[f64], rho_values: &[f64]) -> Result<Self> {
        check_increasing_positive(rho_values, "rho")?;
        let bases = rho_values
            .iter()
            .map(|&rho| {
                let spec = KernelSpec::exponential(1.0, rho)?;
                let a = cross_covariance(&spec, points, points);
                let eig = SymmetricEigen::new(a);
                Ok((eig.eigenvectors, eig.eigenvalues))
            })
            .collect::<Result<_>>()?;
        Ok(Self { points: points.to_vec(), rho_values: rho_values.to_vec(), bases })
    }
}

/// Grid MLE of (σ², ρ, δ²) for the exponential kernel plus white noise.
///
/// `basis` must be built on the same design points and ρ values as `obs` and `grid`.
pub fn mle_noisy(
    obs: &ObservationSet,
    grid: &EstimationGrid,
    delta2_values: &[f64],
    basis: Option<&NoisyBasis>,
) -> Result<EstimationResult> {
    check_increasing_positive(delta2_values, "delta2")?;
    let own;
    let basis = match basis {
        Some(b) => {
            if b.points != obs.points() || b.rho_values != grid.rho_values() {
                return Err(Error::Validation("noisy basis does not match the design or the rho grid".into()));
            }
            b
        }
        None => {
            own = NoisyBasis::new(obs.points(), grid.rho_values())?;
            &own
        }
    };
    let n = obs.len() as f64;
    let y = obs.values_vector();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut surface = Vec::with_capacity(grid.len() * delta2_values.len());
    let mut diagnostics = Diagnostics::default();
    for (r, &rho) in grid.rho_values().iter().enumerate() {
        let (u, lambda) = &basis.bases[r];
        let proj2: Vec<f64> = (u.transpose() * &y).iter().map(|v| v * v).collect();
        for &sigma2 in grid.sigma2_row(r) {
            for &delta2 in delta2_values {
                let mut log_det = 0.0;
                let mut quad = 0.0;
                for (l, p2) in lambda.iter().zip(&proj2) {
                    let e = sigma2 * l.max(0.0) + delta2;
                    log_det += e.ln();
                    quad += p2 / e;
                }
                let l = -0.5 * n * ln_2pi - 0.5 * log_det - 0.5 * quad;
                surface.push(SurfacePoint { sigma2, rho, delta2: Some(delta2), log_likelihood: l, an: 0.0, bn: 0.0, objective: Some(l) });
            }
        }
    }
    let best = argmax(&surface, &mut diagnostics)?;
    let p = surface[best];
    let r = grid.rho_values().iter().position(|&v| v == p.rho).expect("rho from grid");
    let row = grid.sigma2_row(r);
    let d = p.delta2.expect("noisy surface");
    diagnostics.sigma2_boundary_hit = (row.len() > 1 && (p.sigma2 == row[0] || p.sigma2 == row[row.len() - 1]))
        || (delta2_values.len() > 1 && (d == delta2_values[0] || d == delta2_values[delta2_values.len() - 1]));
    diagnostics.rho_boundary_hit = grid.rho_values().len() > 1 && (r == 0 || r == grid.rho_values().len() - 1);
    Ok(EstimationResult {
        sigma2_hat: p.sigma2,
        rho_hat: p.rho,
        microergodic_hat: p.sigma2 / p.rho,
        delta2_hat: Some(d),
        surface,
        an_draws: 0,
        bn_draws: 0,
        seed: 0,
        diagnostics,
    })
}
