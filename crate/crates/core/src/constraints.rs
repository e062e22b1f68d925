//! Piecewise-affine finite-dimensional approximation `Y_m` and the linear
//! inequality sets on its knot values.
//!
//! A constraint is stored as a banded matrix Λ plus componentwise bounds; a
//! knot-value vector `c` is feasible iff `lower ≤ Λc ≤ upper`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of knots.
pub const DEFAULT_KNOTS: usize = 300;

/// Strictly increasing knots `t_1 = 0 < ... < t_m = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotModel {
    knots: Vec<f64>,
}

impl KnotModel {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Validation(format!("need at least 2 knots, got {}", knots.len())));
        }
        if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
            return Err(Error::Validation("knots must include 0 and 1".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation("knots must be strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    /// `m` equispaced knots on [0, 1].
    pub fn equispaced(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Validation(format!("need at least 2 knots, got {m}")));
        }
        Self::new((0..m).map(|j| j as f64 / (m - 1) as f64).collect())
    }

    /// `m` equispaced knots merged with `points`; equispaced knots within `1e-9` of a point are replaced by it.
    pub fn containing(m: usize, points: &[f64]) -> Result<Self> {
        if let Some(&x) = points.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain { x });
        }
        let mut knots: Vec<f64> = Self::equispaced(m)?
            .knots
            .into_iter()
            .filter(|t| points.iter().all(|x| (x - t).abs() > 1e-9))
            .collect();
        knots.extend_from_slice(points);
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        knots[0] = 0.0;
        let last = knots.len() - 1;
        knots[last] = 1.0;
        Self::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn m(&self) -> usize {
        self.knots.len()
    }

    fn is_equispaced(&self) -> bool {
        let h = self.knots[1] - self.knots[0];
        self.knots.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h)
    }

    /// Index `j` of the segment `[t_j, t_{j+1}]` containing `x` and the weight of `t_{j+1}`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let m = self.knots.len();
        let j = match self.knots.binary_search_by(|t| t.partial_cmp(&x).unwrap()) {
            Ok(j) => return (j.min(m - 2), if j == m - 1 { 1.0 } else { 0.0 }),
            Err(j) => j - 1,
        };
        let (a, b) = (self.knots[j], self.knots[j + 1]);
        (j, (x - a) / (b - a))
    }
}

/// Value at `x ∈ [0, 1]` of the piecewise-affine function through `(t_j, c_j)`.
pub fn interpolate(knot_values: &[f64], knots: &KnotModel, x: f64) -> Result<f64> {
    if knot_values.len() != knots.m() {
        return Err(Error::DimensionMismatch { expected: knots.m(), got: knot_values.len() });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain { x });
    }
    let (j, w) = knots.locate(x);
    if w == 0.0 {
        return Ok(knot_values[j]);
    }
    if w == 1.0 {
        return Ok(knot_values[j + 1]);
    }
    Ok((1.0 - w) * knot_values[j] + w * knot_values[j + 1])
}

/// Sparse interpolation weights: `Y_m(x) = Σ w_k c_{j_k}`.
pub fn interpolation_weights(knots: &KnotModel, x: f64) -> Result<[(usize, f64); 2]> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain { x });
    }
    let (j, w) = knots.locate(x);
    Ok([(j, 1.0 - w), (j + 1, w)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintKind {
    /// ℓ ≤ Y ≤ u; either side may be infinite.
    Bounds { lower: f64, upper: f64 },
    Monotone,
    Convex,
}

impl ConstraintKind {
    /// Bounds (-∞, +∞): every vector is feasible.
    pub fn none() -> Self {
        ConstraintKind::Bounds { lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }

    /// Numeric code κ (0 bounds, 1 monotone, 2 convex).
    pub fn code(&self) -> u8 {
        match self {
            ConstraintKind::Bounds { .. } => 0,
            ConstraintKind::Monotone => 1,
            ConstraintKind::Convex => 2,
        }
    }
}

/// One row of Λ: coefficients on consecutive knot values starting at `start`.
#[derive(Debug, Clone, PartialEq)]
struct BandRow {
    start: usize,
    coeffs: Vec<f64>,
}

impl BandRow {
    fn dot(&self, c: &[f64]) -> f64 {
        self.coeffs.iter().zip(&c[self.start..]).map(|(a, b)| a * b).sum()
    }
}

/// Linear-inequality encoding `lower ≤ Λ c ≤ upper` of a constraint set on knot values.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    kind: ConstraintKind,
    m: usize,
    rows: Vec<BandRow>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Builds Λ and the bounds for `kind` on the given knots.
///
/// Convexity on unequal spacings uses divided differences:
/// `(c_{j+1}-c_j)/(t_{j+1}-t_j) - (c_j-c_{j-1})/(t_j-t_{j-1}) ≥ 0`.
pub fn build_constraints(kind: ConstraintKind, knots: &KnotModel) -> Result<ConstraintSpec> {
    let m = knots.m();
    let t = knots.knots();
    let (rows, lower, upper) = match kind {
        ConstraintKind::Bounds { lower, upper } => return ConstraintSpec::bounds(m, lower, upper),
        ConstraintKind::Monotone => {
            let rows = (0..m - 1).map(|j| BandRow { start: j, coeffs: vec![-1.0, 1.0] }).collect();
            (rows, vec![0.0; m - 1], vec![f64::INFINITY; m - 1])
        }
        ConstraintKind::Convex => {
            if m < 3 {
                return Err(Error::Validation(format!("convexity needs at least 3 knots, got {m}")));
            }
            let equal = knots.is_equispaced();
            let rows = (1..m - 1)
                .map(|j| {
                    let coeffs = if equal {
                        vec![1.0, -2.0, 1.0]
                    } else {
                        let (hl, hr) = (t[j] - t[j - 1], t[j + 1] - t[j]);
                        vec![1.0 / hl, -(1.0 / hl + 1.0 / hr), 1.0 / hr]
                    };
                    BandRow { start: j - 1, coeffs }
                })
                .collect();
            (rows, vec![0.0; m - 2], vec![f64::INFINITY; m - 2])
        }
    };
    Ok(ConstraintSpec { kind, m, rows, lower, upper })
}

impl ConstraintSpec {
    /// `lower ≤ c_j ≤ upper` for a vector of any dimension `m ≥ 1`.
    pub fn bounds(m: usize, lower: f64, upper: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Validation("bounds need dimension at least 1".into()));
        }
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::Validation(format!("bounds need lower < upper, got ({lower}, {upper})")));
        }
        let rows = (0..m).map(|j| BandRow { start: j, coeffs: vec![1.0] }).collect();
        let kind = ConstraintKind::Bounds { lower, upper };
        Ok(ConstraintSpec { kind, m, rows, lower: vec![lower; m], upper: vec![upper; m] })
    }

    /// Replaces every row bound, e.g. to relax a shape constraint to `±M`.
    pub fn with_row_bounds(mut self, lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::Validation(format!("row bounds need lower < upper, got ({lower}, {upper})")));
        }
        self.lower.iter_mut().for_each(|l| *l = lower);
        self.upper.iter_mut().for_each(|u| *u = upper);
        Ok(self)
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    /// Number of knot values the constraint acts on.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Number of scalar inequalities (rows of Λ).
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// True when every vector is feasible.
    pub fn is_vacuous(&self) -> bool {
        self.lower.iter().all(|l| *l == f64::NEG_INFINITY) && self.upper.iter().all(|u| *u == f64::INFINITY)
    }

    /// Nonzero entries of row `r` as `(column, coefficient)` pairs.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let row = &self.rows[r];
        row.coeffs.iter().enumerate().map(move |(k, &a)| (row.start + k, a))
    }

    /// Dense Λ.
    pub fn matrix(&self) -> nalgebra::DMatrix<f64> {
        let mut lambda = nalgebra::DMatrix::zeros(self.rows.len(), self.m);
        for r in 0..self.rows.len() {
            for (j, a) in self.row_entries(r) {
                lambda[(r, j)] = a;
            }
        }
        lambda
    }

    /// `Λ c`.
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.dot(c)).collect()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: len });
        }
        Ok(())
    }

    /// Set of scales `t ≥ 0` with `offset + t·direction` feasible, as a closed interval.
    ///
    /// The constraint is linear in `t`, so the set is an interval; `None` when empty.
    pub fn scale_interval(&self, offset: &[f64], direction: &[f64]) -> Result<Option<(f64, f64)>> {
        self.check_dim(offset.len())?;
        self.check_dim(direction.len())?;
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        for (r, row) in self.rows.iter().enumerate() {
            let a = row.dot(offset);
            let b = row.dot(direction);
            let (l, u) = (self.lower[r], self.upper[r]);
            if b == 0.0 {
                if !(l <= a && a <= u) {
                    return Ok(None);
                }
            } else if b > 0.0 {
                lo = lo.max((l - a) / b);
                hi = hi.min((u - a) / b);
            } else {
                lo = lo.max((u - a) / b);
                hi = hi.min((l - a) / b);
            }
            if lo > hi {
                return Ok(None);
            }
        }
        Ok(Some((lo, hi)))
    }
}

/// `lower ≤ Λc ≤ upper` componentwise, boundary included.
pub fn is_feasible(spec: &ConstraintSpec, knot_values: &[f64]) -> Result<bool> {
    spec.check_dim(knot_values.len())?;
    Ok(spec
        .rows
        .iter()
        .zip(spec.lower.iter().zip(&spec.upper))
        .all(|(row, (&l, &u))| {
            let v = row.dot(knot_values);
            l <= v && v <= u
        }))
}

/// Least-squares nondecreasing fit (pool adjacent violators) with positive weights.
pub fn isotonic_regression(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // Blocks of (weighted mean, total weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (v2, w2, n2) = blocks.pop().unwrap();
            let (v1, w1, n1) = blocks.pop().unwrap();
            let w = w1 + w2;
            blocks.push(((v1 * w1 + v2 * w2) / w, w, n1 + n2));
        }
    }
    blocks.into_iter().flat_map(|(v, _, n)| std::iter::repeat(v).take(n)).collect()
}

/// A feasible vector close to `c`, used to start samplers.
///
/// Bounds: clamping. Monotone: isotonic regression. Convex: isotonic regression
/// of the slopes, re-integrated and shifted to preserve the mean.
pub fn project_feasible(spec: &ConstraintSpec, knots: &KnotModel, c: &[f64]) -> Result<Vec<f64>> {
    spec.check_dim(c.len())?;
    let out = match spec.kind {
        ConstraintKind::Bounds { lower, upper } => c.iter().map(|v| v.clamp(lower, upper)).collect(),
        ConstraintKind::Monotone => isotonic_regression(c, &vec![1.0; c.len()]),
        ConstraintKind::Convex => {
            let t = knots.knots();
            let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
            let slopes: Vec<f64> = c.windows(2).zip(&h).map(|(w, h)| (w[1] - w[0]) / h).collect();
            let fitted = isotonic_regression(&slopes, &h);
            let mut out = Vec::with_capacity(c.len());
            out.push(0.0);
            for (s, h) in fitted.iter().zip(&h) {
                let last = *out.last().unwrap();
                out.push(last + s * h);
            }
            let shift = (c.iter().sum::<f64>() - out.iter().sum::<f64>()) / c.len() as f64;
            out.iter().map(|v| v + shift).collect()
        }
    };
    Ok(out)
}
