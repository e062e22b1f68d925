//! Isotropic covariance functions on the real line.
//!
//! Four families are supported:
//!
//! * [`KernelFamily::Matern`]: the general Matérn model with smoothness ν,
//!   `σ² 2^{1-ν}/Γ(ν) (h/ρ)^ν K_ν(h/ρ)`.
//! * [`KernelFamily::Matern52`]: the closed-form ν = 5/2 model in the
//!   `√5`-scaled parametrization, `σ² (1 + √5h/ρ + 5h²/(3ρ²)) exp(-√5h/ρ)`.
//!   The two Matérn families are distinct: `Matern { nu: 2.5 }` at ρ equals
//!   `Matern52` at `√5 ρ`.
//! * [`KernelFamily::Wendland`]: compactly supported, evaluated by quadrature.
//! * [`KernelFamily::Exponential`]: `σ² exp(-h/ρ)`.
//!
//! A nugget δ² never enters [`eval_kernel`]; it only shifts the diagonal of a
//! [`CovarianceMatrix`](crate::linalg::CovarianceMatrix).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{bessel_k, integrate};

/// Largest Matérn smoothness accepted.
pub const MAX_MATERN_NU: f64 = 10.0;

/// Absolute tolerance of the Wendland quadrature.
pub const WENDLAND_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    Matern { nu: f64 },
    Matern52,
    Wendland { s: f64, mu: f64 },
    Exponential,
}

impl KernelFamily {
    /// Exponent `e` of the microergodic parameter `σ²/ρ^e`.
    pub fn microergodic_exponent(&self) -> f64 {
        match *self {
            KernelFamily::Matern { nu } => 2.0 * nu,
            KernelFamily::Matern52 => 5.0,
            KernelFamily::Wendland { s, .. } => 1.0 + 2.0 * s,
            KernelFamily::Exponential => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Matern { .. } => "matern",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Wendland { .. } => "wendland",
            KernelFamily::Exponential => "exponential",
        }
    }

    /// Checks family parameters for a design of dimension `dim`.
    pub fn validate_for_dim(&self, dim: usize) -> Result<()> {
        match *self {
            KernelFamily::Matern { nu } => {
                if !(nu > 0.0 && nu <= MAX_MATERN_NU) {
                    return Err(Error::Validation(format!(
                        "Matérn smoothness must lie in (0, {MAX_MATERN_NU}], got {nu}"
                    )));
                }
            }
            KernelFamily::Wendland { s, mu } => {
                if !(s > 0.0) {
                    return Err(Error::Validation(format!("Wendland s must be positive, got {s}")));
                }
                let min_mu = (dim as f64 + 1.0) / 2.0 + s;
                if !(mu >= min_mu) {
                    return Err(Error::Validation(format!(
                        "Wendland mu must be >= {min_mu} in dimension {dim}, got {mu}"
                    )));
                }
            }
            KernelFamily::Matern52 | KernelFamily::Exponential => {}
        }
        Ok(())
    }
}

/// A covariance family with its parameters θ = (σ², ρ) and optional nugget δ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub sigma2: f64,
    pub rho: f64,
    #[serde(default)]
    pub nugget: f64,
}

impl KernelSpec {
    /// Validated constructor with zero nugget.
    pub fn new(family: KernelFamily, sigma2: f64, rho: f64) -> Result<Self> {
        let spec = Self { family, sigma2, rho, nugget: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn matern52(sigma2: f64, rho: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern52, sigma2, rho)
    }

    pub fn exponential(sigma2: f64, rho: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential, sigma2, rho)
    }

    pub fn with_nugget(mut self, nugget: f64) -> Result<Self> {
        self.nugget = nugget;
        self.validate()?;
        Ok(self)
    }

    /// Same family and correlation length, different variance.
    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    /// Unit-variance, nugget-free version of this kernel.
    pub fn correlation(&self) -> Self {
        Self { family: self.family, sigma2: 1.0, rho: self.rho, nugget: 0.0 }
    }

    /// Validates the parameters for one-dimensional designs.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Validation(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Validation(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(Error::Validation(format!("nugget must be >= 0, got {}", self.nugget)));
        }
        self.family.validate_for_dim(1)
    }
}

/// Covariance `k_θ(lag)` without nugget.
pub fn eval_kernel(spec: &KernelSpec, lag: f64) -> Result<f64> {
    spec.validate()?;
    if !(lag >= 0.0) {
        return Err(Error::Validation(format!("lag must be non-negative, got {lag}")));
    }
    Ok(eval_unchecked(spec, lag))
}

/// [`eval_kernel`] without parameter validation, for hot loops over a validated spec.
pub(crate) fn eval_unchecked(spec: &KernelSpec, lag: f64) -> f64 {
    if lag == 0.0 {
        return spec.sigma2;
    }
    let h = lag.abs();
    spec.sigma2
        * match spec.family {
            KernelFamily::Matern52 => {
                let r = 5f64.sqrt() * h / spec.rho;
                (1.0 + r + r * r / 3.0) * (-r).exp()
            }
            KernelFamily::Exponential => (-h / spec.rho).exp(),
            KernelFamily::Matern { nu } => matern_correlation(nu, h / spec.rho),
            KernelFamily::Wendland { s, mu } => wendland_correlation(s, mu, h / spec.rho),
        }
}

fn matern_correlation(nu: f64, r: f64) -> f64 {
    if r > 700.0 {
        return 0.0;
    }
    let ln_norm = (1.0 - nu) * std::f64::consts::LN_2 - statrs::function::gamma::ln_gamma(nu);
    let value = (ln_norm + nu * r.ln()).exp() * bessel_k(nu, r);
    value.min(1.0)
}

/// φ_{s,μ}(t), normalized so that φ(0) = 1 and φ(t) = 0 for t ≥ 1.
pub fn wendland_correlation(s: f64, mu: f64, t: f64) -> f64 {
    if t >= 1.0 {
        return 0.0;
    }
    if t <= 0.0 {
        return 1.0;
    }
    // Substituting u = t + (1-t) v^{1/s} removes the (u²-t²)^{s-1} endpoint
    // singularity and leaves (1-t)^s / s times a bounded integrand on [0, 1].
    let ln_beta = statrs::function::beta::ln_beta(2.0 * s, mu + 1.0);
    let scale = ((1.0 - t).ln() * s - s.ln() - ln_beta).exp();
    if scale == 0.0 {
        return 0.0;
    }
    let integrand = |v: f64| {
        let u = t + (1.0 - t) * v.powf(1.0 / s);
        u * (u + t).powf(s - 1.0) * (1.0 - u).max(0.0).powf(mu)
    };
    let value = scale * integrate(integrand, 0.0, 1.0, WENDLAND_QUAD_TOL / scale);
    value.clamp(0.0, 1.0)
}

/// Microergodic parameter `σ²/ρ^e` with the family's exponent.
pub fn microergodic(spec: &KernelSpec) -> f64 {
    spec.sigma2 / spec.rho.powf(spec.family.microergodic_exponent())
}
