//! Seeded Monte-Carlo experiments on simulated constrained trajectories.
//!
//! Every replicate draws a trajectory of the knot-value process conditioned on the
//! constraint, observes it at equispaced design points and runs the estimators of its
//! scenario. Results are reproducible from the master seed alone.

pub mod density;
pub mod figure;

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{build_constraints, interpolate, ConstraintKind, ConstraintSpec, KnotModel};
use crate::error::{Error, Result};
use crate::estimators::{
    cmle_fixed_rho, cmle_joint, mle_grid, mle_noisy, mle_variance, AnTable, EstimationGrid, EstimationResult, McConfig,
    NoisyBasis,
};
use crate::gp::{equispaced, ObservationSet};
use crate::kernels::{microergodic, KernelFamily, KernelSpec};
use crate::linalg::cross_covariance;
use crate::prediction::{constraint_impact, predict_constrained, ConstraintImpact, PredictionResult};
use crate::rng;
use crate::sampler::{sample_auto, Gaussian, SamplerConfig};

use density::{kde, ks_distance_normal, mean, median, std_dev, KdeCurve};
use figure::{render_density_figure, Series};

/// Replicate failure fraction above which the experiment as a whole fails.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Variance estimation with the correlation length known.
    VarianceKnownRho,
    /// Joint (σ², ρ) estimation, reported through the microergodic parameter.
    JointMicroergodic,
    /// Exponential kernel observed with white noise.
    NoisyExponential,
    /// Unconstrained versus constrained kriging at fixed targets.
    PredictionComparison,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "variance_known_rho" | "variance" => Ok(Self::VarianceKnownRho),
            "joint_microergodic" | "joint" => Ok(Self::JointMicroergodic),
            "noisy_exponential" | "noisy" => Ok(Self::NoisyExponential),
            "prediction_comparison" | "prediction" => Ok(Self::PredictionComparison),
            other => Err(Error::Parse(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotAlignment {
    /// Exactly `m` equispaced knots.
    None,
    /// The equispaced knot count nearest to `m` whose knots contain the design points.
    Design,
}

/// Flat `key = value` experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// `matern52`, `matern`, `wendland` or `exponential`.
    pub family: String,
    pub nu: Option<f64>,
    pub s: Option<f64>,
    pub mu: Option<f64>,
    /// True parameters.
    pub sigma2: f64,
    pub rho: f64,
    /// True noise variance (noisy scenario only).
    pub nugget: f64,
    /// `none`, `bounds`, `monotone` or `convex`.
    pub constraint: String,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    pub m: usize,
    pub knot_alignment: KnotAlignment,
    pub replicates: usize,
    /// Posterior draws per ρ for the B term.
    pub n_t: usize,
    /// Prior draws per ρ for the A term.
    pub n_an: usize,
    pub sigma2_grid: usize,
    pub rho_grid: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub delta2_grid: usize,
    pub targets: Vec<f64>,
    pub prediction_draws: usize,
    /// Rejection tries per draw before falling back to Gibbs sampling.
    pub max_tries: usize,
    pub seed: u64,
    /// Worker threads; 0 picks the number of cores.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::VarianceKnownRho,
            family: "matern52".into(),
            nu: None,
            s: None,
            mu: None,
            sigma2: 2.0,
            rho: 0.2,
            nugget: 0.0,
            constraint: "bounds".into(),
            lower: -3.0,
            upper: 3.0,
            n: 80,
            m: 150,
            knot_alignment: KnotAlignment::Design,
            replicates: 200,
            n_t: 500,
            n_an: 10_000,
            sigma2_grid: 1000,
            rho_grid: 40,
            rho_min: 0.1,
            rho_max: 0.3,
            delta2_grid: 40,
            targets: vec![0.13, 0.37, 0.51, 0.69, 0.87],
            prediction_draws: 1000,
            max_tries: 10_000,
            seed: 42,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn family(&self) -> Result<KernelFamily> {
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| Error::Validation(format!("family '{}' needs '{key}'", self.family)));
        let family = match self.family.as_str() {
            "matern52" => KernelFamily::Matern52,
            "matern" => KernelFamily::Matern { nu: need(self.nu, "nu")? },
            "wendland" => KernelFamily::Wendland { s: need(self.s, "s")?, mu: need(self.mu, "mu")? },
            "exponential" => KernelFamily::Exponential,
            other => return Err(Error::Validation(format!("unknown kernel family '{other}'"))),
        };
        family.validate_for_dim(1)?;
        Ok(family)
    }

    /// The true kernel, without nugget.
    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.family()?, self.sigma2, self.rho)
    }

    pub fn constraint_kind(&self) -> Result<ConstraintKind> {
        match self.constraint.as_str() {
            "none" => Ok(ConstraintKind::none()),
            "bounds" => Ok(ConstraintKind::Bounds { lower: self.lower, upper: self.upper }),
            "monotone" => Ok(ConstraintKind::Monotone),
            "convex" => Ok(ConstraintKind::Convex),
            other => Err(Error::Validation(format!("unknown constraint '{other}'"))),
        }
    }

    /// Knot count actually used.
    pub fn effective_m(&self) -> usize {
        match self.knot_alignment {
            KnotAlignment::None => self.m,
            KnotAlignment::Design => {
                let step = self.n - 1;
                let k = ((self.m as f64 - 1.0) / step as f64).round().max(1.0) as usize;
                step * k + 1
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Validation(format!("n must be at least 2, got {}", self.n)));
        }
        if self.replicates == 0 {
            return Err(Error::Validation("replicates must be at least 1".into()));
        }
        if self.m < 2 {
            return Err(Error::Validation(format!("m must be at least 2, got {}", self.m)));
        }
        if [self.n_t, self.n_an, self.sigma2_grid, self.rho_grid, self.delta2_grid, self.prediction_draws, self.max_tries]
            .contains(&0)
        {
            return Err(Error::Validation("sample sizes and grid sizes must be at least 1".into()));
        }
        if !(self.rho_min > 0.0 && self.rho_min <= self.rho_max) {
            return Err(Error::Validation(format!("invalid rho range [{}, {}]", self.rho_min, self.rho_max)));
        }
        self.kernel()?;
        if let ConstraintKind::Bounds { lower, upper } = self.constraint_kind()? {
            if !(lower < upper) {
                return Err(Error::Validation(format!("bounds need lower < upper, got ({lower}, {upper})")));
            }
        }
        match self.scenario {
            Scenario::NoisyExponential => {
                if self.family != "exponential" {
                    return Err(Error::Validation("the noisy scenario uses the exponential family".into()));
                }
                if !(self.nugget > 0.0) {
                    return Err(Error::Validation("the noisy scenario needs a positive nugget".into()));
                }
            }
            Scenario::PredictionComparison => {
                if self.targets.is_empty() {
                    return Err(Error::Validation("prediction needs at least one target".into()));
                }
                let design = equispaced(self.n);
                for &t in &self.targets {
                    if !(0.0..=1.0).contains(&t) {
                        return Err(Error::Domain { x: t });
                    }
                    if design.iter().any(|x| (x - t).abs() < 1e-12) {
                        return Err(Error::Validation(format!("target {t} is a design point")));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// True when fewer knots than observations are used.
    pub fn knots_below_n(&self) -> bool {
        self.effective_m() <= self.n
    }
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    /// One value per estimator, or `None` when the replicate failed.
    pub values: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    /// Standard deviation of the limit normal, when the theory provides one.
    pub limit_sd: Option<f64>,
    pub ks_distance: Option<f64>,
    #[serde(skip)]
    pub kde: Option<KdeCurve>,
    /// Set when fewer than two distinct samples made the density estimate impossible.
    pub kde_degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub knots: usize,
    pub estimator_names: Vec<String>,
    pub replicates: Vec<ReplicateRecord>,
    pub summaries: Vec<EstimatorSummary>,
    /// Objective surface of the first successful constrained estimate.
    pub surface: Option<EstimationResult>,
    /// Constrained predictive means outside the bounds (prediction scenario).
    pub bound_violations: usize,
    pub runtime_seconds: f64,
}

impl ExperimentOutput {
    /// Successful values of estimator `k`, in replicate order.
    pub fn samples(&self, k: usize) -> Vec<f64> {
        self.replicates.iter().filter_map(|r| r.values.as_ref().map(|v| v[k])).collect()
    }

    pub fn failures(&self) -> usize {
        self.replicates.iter().filter(|r| r.values.is_none()).count()
    }

    /// `replicate, seed, <estimator...>`; failed replicates have empty value fields.
    pub fn write_samples_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "replicate,seed,{}", self.estimator_names.join(","))?;
        for r in &self.replicates {
            let values = match &r.values {
                Some(v) => v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>(),
                None => vec![String::new(); self.estimator_names.len()],
            };
            writeln!(out, "{},{},{}", r.index, r.seed, values.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "knots": self.knots,
            "estimators": self.estimator_names,
            "replicate_seeds": self.replicates.iter().map(|r| r.seed).collect::<Vec<_>>(),
            "failures": self.replicates.iter().filter(|r| r.error.is_some()).map(|r| serde_json::json!({"replicate": r.index, "error": r.error})).collect::<Vec<_>>(),
            "summaries": self.summaries,
            "bound_violations": self.bound_violations,
            "surface_diagnostics": self.surface.as_ref().map(|s| s.summary_json()),
            "runtime_seconds": self.runtime_seconds,
        })
    }

    pub fn figure_svg(&self) -> String {
        let series: Vec<Series> = self
            .summaries
            .iter()
            .filter_map(|s| s.kde.as_ref().map(|curve| Series { label: s.name.clone(), curve: curve.clone(), median: s.median }))
            .collect();
        let limit = self.summaries.iter().find_map(|s| s.limit_sd);
        let title = format!("{:?}, n = {}, N = {}", self.config.scenario, self.config.n, self.config.replicates);
        render_density_figure(&title, "standardized estimation error", &series, limit)
    }

    /// Writes `manifest.json`, `samples.csv`, `surface.csv` (when available) and `figure.svg`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest())?)?;
        self.write_samples_csv(&dir.join("samples.csv"))?;
        if let Some(surface) = &self.surface {
            surface.write_surface_csv(&dir.join("surface.csv"))?;
        }
        std::fs::write(dir.join("figure.svg"), self.figure_svg())?;
        Ok(())
    }
}

/// Shared, data-independent pieces of an experiment.
struct Setup {
    config: ExperimentConfig,
    family: KernelFamily,
    truth: KernelSpec,
    knots: KnotModel,
    constraint: ConstraintSpec,
    prior: Gaussian,
    design: Vec<f64>,
    plan: Plan,
}

enum Plan {
    Variance { grid: EstimationGrid, an: Option<AnTable> },
    Joint { grid: EstimationGrid, an: Option<AnTable> },
    Noisy { grid: EstimationGrid, delta2: Vec<f64>, basis: NoisyBasis },
    Prediction,
}

struct ReplicateOutcome {
    values: Vec<f64>,
    surface: Option<EstimationResult>,
    bound_violations: usize,
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// Asymptotic standard deviation of `n^{1/4}(σ̂²/ρ̂ - σ₀²/ρ₀)` in the noisy exponential model.
pub fn noisy_microergodic_sd(sigma2: f64, rho: f64, delta2: f64) -> f64 {
    (4.0 * 2f64.sqrt() * delta2.sqrt() * (sigma2 / rho).powf(1.5)).sqrt()
}

fn estimator_names(config: &ExperimentConfig) -> Vec<String> {
    match config.scenario {
        Scenario::VarianceKnownRho | Scenario::JointMicroergodic => vec!["mle".into(), "cmle".into()],
        Scenario::NoisyExponential => vec!["delta2".into(), "microergodic".into()],
        Scenario::PredictionComparison => config.targets.iter().map(|t| format!("reldiff_{t}")).collect(),
    }
}

fn limit_sds(config: &ExperimentConfig, truth: &KernelSpec) -> Vec<Option<f64>> {
    let root2 = 2f64.sqrt();
    match config.scenario {
        Scenario::VarianceKnownRho => vec![Some(root2 * config.sigma2); 2],
        Scenario::JointMicroergodic => vec![Some(root2 * microergodic(truth)); 2],
        Scenario::NoisyExponential => {
            vec![Some(root2 * config.nugget), Some(noisy_microergodic_sd(config.sigma2, config.rho, config.nugget))]
        }
        Scenario::PredictionComparison => vec![None; config.targets.len()],
    }
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let family = config.family()?;
        let truth = config.kernel()?;
        let knots = KnotModel::equispaced(config.effective_m())?;
        let constraint = build_constraints(config.constraint_kind()?, &knots)?;
        let prior_cov = cross_covariance(&truth, knots.knots(), knots.knots());
        let prior = Gaussian::new(DVector::zeros(knots.m()), &prior_cov)?;
        let design = equispaced(config.n);
        let an_seed = rng::derive_seed(config.seed, u64::MAX);
        let constrained = !constraint.is_vacuous();
        let plan = match config.scenario {
            Scenario::VarianceKnownRho => {
                let grid = EstimationGrid::variance(config.sigma2, config.n, config.sigma2_grid, config.rho)?;
                let an = constrained
                    .then(|| AnTable::compute(family, &grid, &knots, &constraint, config.n_an, an_seed))
                    .transpose()?;
                Plan::Variance { grid, an }
            }
            Scenario::JointMicroergodic => {
                let grid = EstimationGrid::microergodic(
                    microergodic(&truth),
                    family.microergodic_exponent(),
                    config.n,
                    (config.rho_min, config.rho_max),
                    config.rho_grid,
                    config.sigma2_grid,
                )?;
                let an = constrained
                    .then(|| AnTable::compute(family, &grid, &knots, &constraint, config.n_an, an_seed))
                    .transpose()?;
                Plan::Joint { grid, an }
            }
            Scenario::NoisyExponential => {
                let n = config.n as f64;
                let c0 = config.sigma2 / config.rho;
                let sd_c = noisy_microergodic_sd(config.sigma2, config.rho, config.nugget) / n.powf(0.25);
                let sd_d = 2f64.sqrt() * config.nugget / n.sqrt();
                let c_values = linspace((c0 - 4.0 * sd_c).max(0.01 * c0), c0 + 4.0 * sd_c, config.sigma2_grid);
                let rho_values = linspace(config.rho_min, config.rho_max, config.rho_grid);
                let rows = rho_values.iter().map(|r| c_values.iter().map(|c| c * r).collect()).collect();
                let grid = EstimationGrid::new(rho_values, rows)?;
                let delta2 =
                    linspace((config.nugget - 4.0 * sd_d).max(0.01 * config.nugget), config.nugget + 4.0 * sd_d, config.delta2_grid);
                let basis = NoisyBasis::new(&design, grid.rho_values())?;
                Plan::Noisy { grid, delta2, basis }
            }
            Scenario::PredictionComparison => Plan::Prediction,
        };
        Ok(Self { config: config.clone(), family, truth, knots, constraint, prior, design, plan })
    }

    fn replicate(&self, index: usize, seed: u64) -> Result<ReplicateOutcome> {
        let c = &self.config;
        let n = c.n as f64;
        let trajectory = sample_auto(&self.prior, &self.constraint, Some(&self.knots), 1, c.max_tries, rng::derive_seed(seed, 0))?;
        let knot_values = trajectory.row(0);
        let mut y: Vec<f64> =
            self.design.iter().map(|&x| interpolate(&knot_values, &self.knots, x)).collect::<Result<_>>()?;
        let mc = McConfig { n_an: c.n_an, n_bn: c.n_t, seed: rng::derive_seed(seed, 2) };
        let keep_surface = index == 0;
        match &self.plan {
            Plan::Variance { grid, an } => {
                let obs = ObservationSet::new(self.design.clone(), y)?;
                let mle = mle_variance(&obs, &self.truth.correlation())?;
                let cmle = cmle_fixed_rho(&obs, self.family, c.rho, grid.sigma2_row(0).to_vec(), &self.constraint, &self.knots, &mc, an.as_ref())?;
                let values = vec![n.sqrt() * (mle - c.sigma2), n.sqrt() * (cmle.sigma2_hat - c.sigma2)];
                Ok(ReplicateOutcome { values, surface: keep_surface.then_some(cmle), bound_violations: 0 })
            }
            Plan::Joint { grid, an } => {
                let obs = ObservationSet::new(self.design.clone(), y)?;
                let m0 = microergodic(&self.truth);
                let mle = mle_grid(&obs, self.family, grid)?;
                let cmle = cmle_joint(&obs, self.family, grid, &self.constraint, &self.knots, &mc, an.as_ref())?;
                let values = vec![n.sqrt() * (mle.microergodic_hat - m0), n.sqrt() * (cmle.microergodic_hat - m0)];
                Ok(ReplicateOutcome { values, surface: keep_surface.then_some(cmle), bound_violations: 0 })
            }
            Plan::Noisy { grid, delta2, basis } => {
                let noise = Normal::new(0.0, c.nugget.sqrt()).map_err(|e| Error::Validation(e.to_string()))?;
                let mut r = rng::stream(seed, 1);
                for v in &mut y {
                    *v += noise.sample(&mut r);
                }
                let obs = ObservationSet::new(self.design.clone(), y)?;
                let res = mle_noisy(&obs, grid, delta2, Some(basis))?;
                let values = vec![
                    n.sqrt() * (res.delta2_hat.expect("noisy estimate") - c.nugget),
                    n.powf(0.25) * (res.microergodic_hat - c.sigma2 / c.rho),
                ];
                Ok(ReplicateOutcome { values, surface: keep_surface.then_some(res), bound_violations: 0 })
            }
            Plan::Prediction => {
                let obs = ObservationSet::new(self.design.clone(), y)?;
                let sampler = SamplerConfig::rejection(c.prediction_draws, c.max_tries, rng::derive_seed(seed, 3));
                let predictions = match predict_constrained(&self.truth, &obs, &self.knots, &self.constraint, &c.targets, &sampler) {
                    Err(Error::InfeasibleSuspected { .. }) => {
                        let gibbs = SamplerConfig::gibbs(c.prediction_draws, rng::derive_seed(seed, 3));
                        predict_constrained(&self.truth, &obs, &self.knots, &self.constraint, &c.targets, &gibbs)?
                    }
                    other => other?,
                };
                let violations = match self.constraint.kind() {
                    ConstraintKind::Bounds { lower, upper } => predictions
                        .iter()
                        .filter(|p| !(lower <= p.mean_constrained && p.mean_constrained <= upper))
                        .count(),
                    _ => 0,
                };
                let values = match constraint_impact(&self.truth, &obs, &self.knots, &self.constraint, &c.targets, c.prediction_draws, rng::derive_seed(seed, 4)) {
                    Ok(impacts) => predictions.iter().zip(&impacts).map(|(p, i)| impact_relative_difference(p, i)).collect(),
                    Err(Error::EstimationFailed(_)) => predictions.iter().map(relative_difference).collect(),
                    Err(e) => return Err(e),
                };
                Ok(ReplicateOutcome { values, surface: None, bound_violations: violations })
            }
        }
    }
}

/// `|Ŷ - Ŷ_c| / σ̂` from draw-based predictions.
pub fn relative_difference(p: &PredictionResult) -> f64 {
    (p.mean - p.mean_constrained).abs() / p.variance.sqrt()
}

/// `|Ŷ - Ŷ_c| / σ̂` with `Ŷ_c = Ŷ_m + shift` from the importance-sampling estimate.
pub fn impact_relative_difference(p: &PredictionResult, impact: &ConstraintImpact) -> f64 {
    ((p.mean - impact.mean) - impact.shift).abs() / p.variance.sqrt()
}

fn summarize(name: &str, samples: &[f64], limit_sd: Option<f64>) -> EstimatorSummary {
    let count = samples.len();
    let (kde_curve, degenerate) = match kde(samples) {
        Ok(curve) => (Some(curve), false),
        Err(_) => (None, true),
    };
    let has = count > 0;
    EstimatorSummary {
        name: name.into(),
        count,
        mean: if has { mean(samples) } else { f64::NAN },
        median: if has { median(samples) } else { f64::NAN },
        sd: std_dev(samples),
        limit_sd,
        ks_distance: limit_sd.filter(|_| has).map(|sd| ks_distance_normal(samples, sd)),
        kde: kde_curve,
        kde_degenerate: degenerate,
    }
}

/// Runs all replicates of `config` and aggregates their standardized estimates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let setup = Setup::new(config)?;
    let seeds: Vec<u64> = (0..config.replicates).map(|r| rng::derive_seed(config.seed, r as u64)).collect();
    let work = || -> Vec<Result<ReplicateOutcome>> {
        seeds.par_iter().enumerate().map(|(i, &seed)| setup.replicate(i, seed)).collect()
    };
    let outcomes = if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::ExperimentFailed(e.to_string()))?
            .install(work)
    } else {
        work()
    };

    let names = estimator_names(config);
    let mut replicates = Vec::with_capacity(outcomes.len());
    let mut surface = None;
    let mut bound_violations = 0;
    for (index, (outcome, seed)) in outcomes.into_iter().zip(&seeds).enumerate() {
        match outcome {
            Ok(o) => {
                if surface.is_none() {
                    surface = o.surface;
                }
                bound_violations += o.bound_violations;
                replicates.push(ReplicateRecord { index, seed: *seed, values: Some(o.values), error: None });
            }
            Err(e) if e.is_numerical() => {
                replicates.push(ReplicateRecord { index, seed: *seed, values: None, error: Some(e.to_string()) })
            }
            Err(e) => return Err(e),
        }
    }
    let failures = replicates.iter().filter(|r| r.values.is_none()).count();
    if failures as f64 > MAX_FAILURE_RATE * config.replicates as f64 {
        let first = replicates.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::ExperimentFailed(format!(
            "{failures} of {} replicates failed (first error: {first})",
            config.replicates
        )));
    }
    let limits = limit_sds(config, &setup.truth);
    let mut output = ExperimentOutput {
        config: config.clone(),
        knots: setup.knots.m(),
        estimator_names: names,
        replicates,
        summaries: Vec::new(),
        surface,
        bound_violations,
        runtime_seconds: 0.0,
    };
    output.summaries =
        output.estimator_names.iter().enumerate().map(|(k, name)| summarize(name, &output.samples(k), limits[k])).collect();
    output.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(output)
}

/// One trajectory of the knot process, conditioned on the constraint when one is given.
pub fn simulate_trajectory(
    truth: &KernelSpec,
    knots: &KnotModel,
    constraint: Option<&ConstraintSpec>,
    max_tries: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let prior = Gaussian::new(DVector::zeros(knots.m()), &cross_covariance(truth, knots.knots(), knots.knots()))?;
    match constraint {
        Some(spec) => Ok(sample_auto(&prior, spec, Some(knots), 1, max_tries, seed)?.row(0)),
        None => Ok(prior.draw(&mut rng::from_seed(seed)).iter().copied().collect()),
    }
}
