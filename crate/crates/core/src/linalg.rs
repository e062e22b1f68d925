//! Covariance matrices and their factorizations.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernels::{eval_unchecked, KernelSpec};

/// Relative diagonal jitter tried, in order, when a plain Cholesky fails.
pub const JITTER_LADDER: [f64; 3] = [1e-12, 1e-10, 1e-8];

/// A symmetric positive-definite matrix with its cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
    cholesky: DMatrix<f64>,
    log_det: f64,
    jitter_applied: f64,
}

impl CovarianceMatrix {
    /// Factorizes `entries`, climbing [`JITTER_LADDER`] (scaled by `scale`) on failure.
    pub fn from_entries(entries: DMatrix<f64>, scale: f64) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: entries.ncols() });
        }
        let (cholesky, jitter_applied) = cholesky_with_jitter(&entries, scale)?;
        let log_det = 2.0 * cholesky.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self { entries, cholesky, log_det, jitter_applied })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Lower-triangular factor `L` with `L Lᵀ = entries + jitter·I`.
    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.cholesky
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Absolute diagonal jitter that was added (0 when none was needed).
    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }

    /// `L⁻¹ b`.
    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        self.cholesky
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `L⁻¹ B` for a matrix right-hand side.
    pub fn whiten_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.cholesky
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `R⁻¹ b` through two triangular solves.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let w = self.whiten(b);
        self.cholesky
            .tr_solve_lower_triangular(&w)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `yᵀ R⁻¹ y`.
    pub fn quad_form(&self, y: &DVector<f64>) -> f64 {
        self.whiten(y).norm_squared()
    }
}

fn try_cholesky(m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let l = nalgebra::Cholesky::new(m)?.unpack();
    l.diagonal().iter().all(|d| *d > 0.0 && d.is_finite()).then_some(l)
}

/// Cholesky factor of `m`, adding `ε·scale` to the diagonal for ε on the jitter ladder if needed.
pub fn cholesky_with_jitter(m: &DMatrix<f64>, scale: f64) -> Result<(DMatrix<f64>, f64)> {
    if let Some(l) = try_cholesky(m.clone()) {
        return Ok((l, 0.0));
    }
    for eps in JITTER_LADDER {
        let jitter = eps * scale;
        let mut shifted = m.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(l) = try_cholesky(shifted) {
            return Ok((l, jitter));
        }
    }
    Err(Error::Conditioning { n: m.nrows(), ladder: JITTER_LADDER.iter().map(|e| e * scale).collect() })
}

/// Kernel cross-covariance `[k(a_i - b_j)]` without nugget.
///
/// Kernel values are memoized by lag, so equispaced designs only evaluate each
/// distinct lag once.
pub fn cross_covariance(spec: &KernelSpec, a: &[f64], b: &[f64]) -> DMatrix<f64> {
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let memoize = !matches!(spec.family, crate::kernels::KernelFamily::Matern52 | crate::kernels::KernelFamily::Exponential);
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        let lag = (a[i] - b[j]).abs();
        if memoize {
            *cache.entry(lag.to_bits()).or_insert_with(|| eval_unchecked(spec, lag))
        } else {
            eval_unchecked(spec, lag)
        }
    })
}

/// Covariance matrix `[k(x_i - x_j)] + δ² I` of `spec` at `points`.
pub fn covariance_matrix(spec: &KernelSpec, points: &[f64]) -> Result<CovarianceMatrix> {
    spec.validate()?;
    if spec.nugget == 0.0 {
        let mut sorted: Vec<f64> = points.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("points must not be NaN"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate points require a positive nugget".into()));
        }
    }
    let mut entries = cross_covariance(spec, points, points);
    // Symmetric by construction: |a-b| == |b-a| in floating point.
    for i in 0..points.len() {
        entries[(i, i)] = spec.sigma2 + spec.nugget;
    }
    CovarianceMatrix::from_entries(entries, spec.sigma2)
}

/// Square-root factor `S` (`dim × cols`) with `S Sᵀ ≈ C` for a symmetric positive semi-definite `C`.
///
/// Coordinates with an exactly zero variance are left out of the factorization, so
/// they stay exactly at their mean under `x = μ + S z`.
#[derive(Debug, Clone)]
pub struct SqrtFactor {
    dim: usize,
    active: Vec<usize>,
    inner: InnerFactor,
}

#[derive(Debug, Clone)]
enum InnerFactor {
    /// Lower-triangular Cholesky factor (possibly of a jittered matrix).
    Cholesky(DMatrix<f64>),
    /// `U diag(√λ)` from an eigendecomposition with negative eigenvalues clamped to 0.
    Eigen { vectors: DMatrix<f64>, sqrt_values: DVector<f64> },
}

impl SqrtFactor {
    /// Factorizes a PSD matrix: jittered Cholesky first, eigendecomposition as fallback.
    pub fn new(c: &DMatrix<f64>) -> Self {
        let dim = c.nrows();
        let active: Vec<usize> = (0..dim).filter(|&i| c[(i, i)] != 0.0).collect();
        let sub = c.select_rows(&active).select_columns(&active);
        let scale = sub.diagonal().iter().cloned().fold(0.0, f64::max);
        if !active.is_empty() && scale > 0.0 {
            if let Ok((l, _)) = cholesky_with_jitter(&sub, scale) {
                return Self { dim, active, inner: InnerFactor::Cholesky(l) };
            }
        }
        let sym = (&sub + sub.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let sqrt_values = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        Self { dim, active, inner: InnerFactor::Eigen { vectors: eig.eigenvectors, sqrt_values } }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the latent vector `z`.
    pub fn cols(&self) -> usize {
        self.active.len()
    }

    /// Dense `S`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let inner = match &self.inner {
            InnerFactor::Cholesky(l) => l.clone(),
            InnerFactor::Eigen { vectors, sqrt_values } => {
                let mut s = vectors.clone();
                for (j, mut col) in s.column_iter_mut().enumerate() {
                    col *= sqrt_values[j];
                }
                s
            }
        };
        let mut s = DMatrix::zeros(self.dim, self.cols());
        for (k, &i) in self.active.iter().enumerate() {
            s.row_mut(i).copy_from(&inner.row(k));
        }
        s
    }

    /// `S z`.
    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        let sub = match &self.inner {
            InnerFactor::Cholesky(l) => l * z,
            InnerFactor::Eigen { vectors, sqrt_values } => vectors * z.component_mul(sqrt_values),
        };
        let mut x = DVector::zeros(self.dim);
        for (k, &i) in self.active.iter().enumerate() {
            x[i] = sub[k];
        }
        x
    }

    /// Some `z` with `S z ≈ x` on the active coordinates (least squares on the range for the eigen form).
    pub fn preimage(&self, x: &DVector<f64>) -> DVector<f64> {
        let sub = DVector::from_iterator(self.cols(), self.active.iter().map(|&i| x[i]));
        match &self.inner {
            InnerFactor::Cholesky(l) => {
                l.solve_lower_triangular(&sub).expect("Cholesky factor has a positive diagonal")
            }
            InnerFactor::Eigen { vectors, sqrt_values } => {
                let max = sqrt_values.iter().cloned().fold(0.0, f64::max);
                let proj = vectors.transpose() * sub;
                DVector::from_fn(proj.len(), |i, _| {
                    let s = sqrt_values[i];
                    if s > 1e-12 * max { proj[i] / s } else { 0.0 }
                })
            }
        }
    }
}
