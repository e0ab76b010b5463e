//! Nadaraya–Watson kernel regression with manifold-aware averaging.

use crate::error::{Error, Result};
use crate::manifold::{tangent_norm, Manifold, Tangent};
use crate::path::{Curve, PiecewiseGeodesicPath};
use crate::posterior::Dataset;

pub const FRECHET_MAX_ITERATIONS: usize = 100;
pub const FRECHET_TOLERANCE: f64 = 1e-12;

/// Rule-of-thumb bandwidth `σ̂ (4 / 3n)^{1/5}` with the robust scale
/// `σ̂ = 1.4826 · MAD`. Falls back to the sample standard deviation when the
/// MAD vanishes but the values are not all equal.
pub fn bandwidth_rule(ts: &[f64]) -> Result<f64> {
    if ts.len() < 2 {
        return Err(Error::InvalidConfig(
            "bandwidth rule needs at least two predictor values".into(),
        ));
    }
    let first = ts[0];
    if ts.iter().all(|&t| t == first) {
        return Err(Error::DegeneratePredictors);
    }
    let med = median(ts.to_vec());
    let mad = median(ts.iter().map(|t| (t - med).abs()).collect());
    let mut scale = 1.4826 * mad;
    if scale == 0.0 {
        let n = ts.len() as f64;
        let mean = ts.iter().sum::<f64>() / n;
        scale = (ts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    }
    Ok(scale * (4.0 / (3.0 * ts.len() as f64)).powf(0.2))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Weighted Fréchet mean: the minimizer of `Σ w_i dist(·, x_i)²`.
///
/// Iterates `μ ← exp_μ(Σ w_i log_μ(x_i) / Σ w_i)` from the highest-weight
/// point until the step is below 1e-12, for at most 100 iterations.
pub fn frechet_mean_weighted<M: Manifold>(
    m: &M,
    points: &[M::Point],
    weights: &[f64],
) -> Result<M::Point> {
    if points.len() != weights.len() {
        return Err(Error::InvalidConfig(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidConfig("at least one weight must be positive".into()));
    }
    let start = weights
        .iter()
        .enumerate()
        .fold(0, |best, (i, w)| if *w > weights[best] { i } else { best });
    let mut mean = points[start];
    for _ in 0..FRECHET_MAX_ITERATIONS {
        let mut step: Tangent = [0.0; 3];
        for (p, w) in points.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            let v = m.log_map(&mean, p);
            for i in 0..3 {
                step[i] += w / total * v[i];
            }
        }
        if tangent_norm(&step) <= FRECHET_TOLERANCE {
            return Ok(mean);
        }
        mean = m.exp_map(&mean, &step);
    }
    Err(Error::NoConvergence {
        iterations: FRECHET_MAX_ITERATIONS,
    })
}

/// Weighted sum of squared distances minimized by [`frechet_mean_weighted`].
pub fn frechet_objective<M: Manifold>(
    m: &M,
    candidate: &M::Point,
    points: &[M::Point],
    weights: &[f64],
) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * m.distance(candidate, p).powi(2))
        .sum()
}

/// Nadaraya–Watson estimate at `t`: the Fréchet mean of the responses with
/// Gaussian weights `exp(−(t − t_i)² / 2h²)`.
///
/// Weights are shifted so that the nearest observation has weight one,
/// which leaves the mean unchanged and avoids total underflow for tiny `h`.
pub fn kernel_regress<M: Manifold>(
    m: &M,
    data: &Dataset<M::Point>,
    t: f64,
    bandwidth: f64,
) -> Result<M::Point> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let sq: Vec<f64> = data.iter().map(|o| (t - o.t).powi(2)).collect();
    let nearest = sq.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = sq
        .iter()
        .map(|d| (-(d - nearest) / (2.0 * bandwidth * bandwidth)).exp())
        .collect();
    frechet_mean_weighted(m, &data.responses(), &weights)
}

/// Kernel-regression fit with a fixed bandwidth.
#[derive(Debug, Clone)]
pub struct KernelFit<'a, P> {
    pub bandwidth: f64,
    pub data: &'a Dataset<P>,
}

impl<'a, P: Copy> KernelFit<'a, P> {
    pub fn new(data: &'a Dataset<P>, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(KernelFit { bandwidth, data })
    }

    /// Uses [`bandwidth_rule`] on the dataset's predictor values.
    pub fn with_rule_of_thumb(data: &'a Dataset<P>) -> Result<Self> {
        KernelFit::new(data, bandwidth_rule(&data.ts())?)
    }

    pub fn predict<M: Manifold<Point = P>>(&self, m: &M, t: f64) -> Result<P> {
        kernel_regress(m, self.data, t, self.bandwidth)
    }

    /// Samples the fit at `K + 1` equispaced times.
    pub fn to_path<M: Manifold<Point = P>>(
        &self,
        m: &M,
        segments: usize,
    ) -> Result<PiecewiseGeodesicPath<P>> {
        let knots = (0..=segments)
            .map(|k| self.predict(m, k as f64 / segments as f64))
            .collect::<Result<Vec<_>>>()?;
        PiecewiseGeodesicPath::new(knots)
    }
}

impl<M: Manifold> Curve<M> for KernelFit<'_, M::Point> {
    /// Falls back to the nearest observation if the Fréchet iteration
    /// fails to converge.
    fn point_at(&self, m: &M, t: f64) -> M::Point {
        self.predict(m, t).unwrap_or_else(|_| {
            let nearest = self
                .data
                .iter()
                .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
                .expect("KernelFit data is nonempty");
            nearest.x
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Angle, Circle, Sphere, UnitVector3};
    use std::f64::consts::{PI, TAU};

    #[test]
    fn two_point_bandwidth() {
        // 1.4826·0.5·(2/3)^{1/5}
        let h = bandwidth_rule(&[0.0, 1.0]).unwrap();
        let expected = 1.4826 * 0.5 * (2.0f64 / 3.0).powf(0.2);
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.683_558_6).abs() < 1e-7, "{h}");
    }

    #[test]
    fn bandwidth_is_scale_equivariant() {
        let ts = [0.1, 0.4, 0.45, 0.8, 0.95, 0.3];
        let scaled: Vec<f64> = ts.iter().map(|t| 3.0 * t).collect();
        let a = bandwidth_rule(&ts).unwrap();
        let b = bandwidth_rule(&scaled).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12);
    }

    #[test]
    fn degenerate_predictors() {
        assert!(matches!(
            bandwidth_rule(&[0.3, 0.3, 0.3]),
            Err(Error::DegeneratePredictors)
        ));
        // MAD is zero here, but the values differ
        assert!(bandwidth_rule(&[0.0, 0.0, 0.0, 1.0]).unwrap() > 0.0);
    }

    #[test]
    fn wrap_aware_midpoint() {
        let m = Circle::new();
        let mean = frechet_mean_weighted(
            &m,
            &[Angle::new(0.0), Angle::new(TAU - 0.2)],
            &[1.0, 1.0],
        )
        .unwrap();
        assert!(m.distance(&mean, &Angle::new(TAU - 0.1)) < 1e-12);
    }

    #[test]
    fn single_point_mean() {
        let m = Sphere::new();
        let p = UnitVector3::from_spherical(1.0, 2.0);
        let mean = frechet_mean_weighted(&m, &[p], &[0.3]).unwrap();
        assert!(m.distance(&mean, &p) < 1e-15);
    }

    #[test]
    fn three_point_mean_matches_grid_search() {
        let m = Circle::new();
        let pts = [Angle::new(0.0), Angle::new(PI / 2.0), Angle::new(PI)];
        let w = [1.0; 3];
        let mean = frechet_mean_weighted(&m, &pts, &w).unwrap();
        // brute force over a 1e-4 grid
        let mut best = (f64::INFINITY, 0.0);
        let steps = (TAU / 1e-4) as usize;
        for i in 0..steps {
            let c = Angle::new(i as f64 * 1e-4);
            let obj = frechet_objective(&m, &c, &pts, &w);
            if obj < best.0 {
                best = (obj, c.radians());
            }
        }
        assert!((best.1 - PI / 2.0).abs() < 1e-4);
        assert!(m.distance(&mean, &Angle::new(PI / 2.0)) < 1e-12);
    }

    #[test]
    fn rejects_zero_weights() {
        let m = Circle::new();
        assert!(frechet_mean_weighted(&m, &[Angle::new(0.0)], &[0.0]).is_err());
        assert!(frechet_mean_weighted(&m, &[Angle::new(0.0)], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kernel_regression_limits() {
        let m = Circle::new();
        let data = Dataset::from_pairs([
            (0.1, Angle::new(0.2)),
            (0.4, Angle::new(0.9)),
            (0.8, Angle::new(1.4)),
        ])
        .unwrap();
        let wide = kernel_regress(&m, &data, 0.5, 1e6).unwrap();
        let flat = frechet_mean_weighted(&m, &data.responses(), &[1.0; 3]).unwrap();
        assert!(m.distance(&wide, &flat) < 1e-9);
        let narrow = kernel_regress(&m, &data, 0.4, 1e-6).unwrap();
        assert!(m.distance(&narrow, &Angle::new(0.9)) < 1e-12);
        let constant = Dataset::from_pairs([(0.1, Angle::new(2.0)), (0.9, Angle::new(2.0))]).unwrap();
        for t in [0.0, 0.3, 1.0] {
            let p = kernel_regress(&m, &constant, t, 0.2).unwrap();
            assert!(m.distance(&p, &Angle::new(2.0)) < 1e-12);
        }
    }
}
