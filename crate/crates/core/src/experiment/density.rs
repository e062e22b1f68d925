//! Kernel density estimates and distances to a normal limit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::normal_cdf;

/// Number of evaluation points of a density curve.
pub const KDE_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    s
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(samples: &[f64]) -> f64 {
    quantile(&sorted(samples), 0.5)
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single sample.
pub fn std_dev(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let m = mean(samples);
    (samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (samples.len() - 1) as f64).sqrt()
}

/// Silverman's rule `0.9 min(sd, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let s = sorted(samples);
    let sd = std_dev(samples);
    let iqr = (quantile(&s, 0.75) - quantile(&s, 0.25)) / 1.34;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    0.9 * spread * (samples.len() as f64).powf(-0.2)
}

/// Gaussian-kernel density on [`KDE_POINTS`] points spanning the samples ± 3 bandwidths.
pub fn kde(samples: &[f64]) -> Result<KdeCurve> {
    if samples.len() < 2 {
        return Err(Error::Validation(format!("density estimate needs at least 2 samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("density estimate needs finite samples".into()));
    }
    let h = silverman_bandwidth(samples);
    if !(h > 0.0) {
        return Err(Error::Validation("density estimate is degenerate: all samples are equal".into()));
    }
    let s = sorted(samples);
    let (lo, hi) = (s[0] - 3.0 * h, s[s.len() - 1] + 3.0 * h);
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..KDE_POINTS).map(|i| lo + step * i as f64).collect();
    let density = grid
        .iter()
        .map(|&x| {
            norm * samples
                .iter()
                .map(|&xi| {
                    let u = (x - xi) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(KdeCurve { grid, density, bandwidth: h })
}

/// Trapezoid integral of a density curve.
pub fn trapezoid(curve: &KdeCurve) -> f64 {
    curve
        .grid
        .windows(2)
        .zip(curve.density.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and `N(0, sd²)`.
pub fn ks_distance_normal(samples: &[f64], sd: f64) -> f64 {
    let s = sorted(samples);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x / sd);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::from_seed(seed);
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    #[test]
    fn kde_of_standard_normal_draws() {
        let x = normals(10_000, 1);
        let c = kde(&x).unwrap();
        assert_eq!(c.grid.len(), KDE_POINTS);
        let at0 = c.grid.iter().zip(&c.density).min_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap()).unwrap();
        let target = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((at0.1 - target).abs() < 0.1 * target);
        assert!((trapezoid(&c) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn kde_rejects_degenerate_input() {
        assert!(kde(&[1.0]).is_err());
        assert!(kde(&[2.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn kde_is_shift_equivariant() {
        let x = normals(300, 2);
        let c = 7.25;
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let (a, b) = (kde(&x).unwrap(), kde(&shifted).unwrap());
        assert!((a.bandwidth - b.bandwidth).abs() < 1e-12);
        for i in 0..KDE_POINTS {
            assert!((a.grid[i] + c - b.grid[i]).abs() < 1e-12);
            assert!((a.density[i] - b.density[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((std_dev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ks_distance_is_small_for_matching_law_and_large_otherwise() {
        let x = normals(5000, 3);
        assert!(ks_distance_normal(&x, 1.0) < 0.03);
        let shifted: Vec<f64> = x.iter().map(|v| v + 2.0).collect();
        assert!(ks_distance_normal(&shifted, 1.0) > 0.5);
        assert!((0.0..=1.0).contains(&ks_distance_normal(&[100.0], 1.0)));
    }
}
