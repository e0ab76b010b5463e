//! Piecewise-geodesic paths and the discretized Brownian-motion prior.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{HeatStep, Manifold, ManifoldKind};

/// A function `[0, 1] → M` that is geodesic on each `[k/K, (k+1)/K]`.
///
/// Only the `K + 1` knot values are stored; the sidelength `h = 1/K` is
/// derived from `K` so no floating-point drift accumulates.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseGeodesicPath<P> {
    knots: Vec<P>,
}

impl<P: Copy> PiecewiseGeodesicPath<P> {
    /// Builds a path from `K + 1` knots, `K ≥ 1`.
    pub fn new(knots: Vec<P>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "a path needs at least two knots, got {}",
                knots.len()
            )));
        }
        Ok(PiecewiseGeodesicPath { knots })
    }

    pub fn constant(value: P, k: usize) -> Self {
        assert!(k >= 1, "K must be positive");
        PiecewiseGeodesicPath {
            knots: vec![value; k + 1],
        }
    }

    /// Number of geodesic pieces `K`.
    pub fn segments(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn sidelength(&self) -> f64 {
        1.0 / self.segments() as f64
    }

    pub fn knots(&self) -> &[P] {
        &self.knots
    }

    pub fn knot(&self, k: usize) -> P {
        self.knots[k]
    }

    pub fn set_knot(&mut self, k: usize, value: P) {
        self.knots[k] = value;
    }

    pub fn knot_time(&self, k: usize) -> f64 {
        k as f64 / self.segments() as f64
    }

    pub fn knot_times(&self) -> Vec<f64> {
        (0..self.knots.len()).map(|k| self.knot_time(k)).collect()
    }

    pub fn map<Q: Copy>(&self, f: impl FnMut(&P) -> Q) -> PiecewiseGeodesicPath<Q> {
        PiecewiseGeodesicPath {
            knots: self.knots.iter().map(f).collect(),
        }
    }

    /// Piece index and fraction within it for `t ∈ [0, 1]`; `None` for
    /// the fraction means `t` is (up to 1e-12) the knot time of the index.
    pub(crate) fn locate(&self, t: f64) -> (usize, Option<f64>) {
        let k = self.segments();
        let x = t * k as f64;
        let nearest = x.round();
        if (x - nearest).abs() <= 1e-12 {
            return ((nearest as usize).min(k), None);
        }
        let idx = (x.floor() as usize).min(k - 1);
        (idx, Some(x - idx as f64))
    }

    /// Value at `t`, assumed in `[0, 1]` (clamped otherwise).
    pub fn eval_clamped<M: Manifold<Point = P>>(&self, m: &M, t: f64) -> P {
        match self.locate(t.clamp(0.0, 1.0)) {
            (k, None) => self.knots[k],
            (k, Some(s)) => m.interpolate(&self.knots[k], &self.knots[k + 1], s),
        }
    }

    /// Value at `t ∈ [0, 1]`.
    pub fn eval<M: Manifold<Point = P>>(&self, m: &M, t: f64) -> Result<P> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfDomain(t));
        }
        Ok(self.eval_clamped(m, t))
    }

    /// Sum of geodesic distances between consecutive knots.
    pub fn knot_total_variation<M: Manifold<Point = P>>(&self, m: &M) -> f64 {
        self.knots
            .windows(2)
            .map(|w| m.distance(&w[0], &w[1]))
            .sum()
    }
}

/// Anything that can be evaluated as a function `[0, 1] → M`.
pub trait Curve<M: Manifold> {
    fn point_at(&self, m: &M, t: f64) -> M::Point;

    /// Times at which the curve has kinks, if any.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<M: Manifold> Curve<M> for PiecewiseGeodesicPath<M::Point> {
    fn point_at(&self, m: &M, t: f64) -> M::Point {
        self.eval_clamped(m, t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knot_times()
    }
}

/// Adapts a closure `t ↦ point` into a [`Curve`].
#[derive(Debug, Clone, Copy)]
pub struct FnCurve<F>(pub F);

impl<M: Manifold, F: Fn(f64) -> M::Point> Curve<M> for FnCurve<F> {
    fn point_at(&self, _m: &M, t: f64) -> M::Point {
        (self.0)(t)
    }
}

#[derive(Serialize, Deserialize)]
struct PathDocument<P> {
    manifold: ManifoldKind,
    #[serde(rename = "K")]
    k: usize,
    knots: Vec<P>,
}

impl<P: Copy + Serialize> PiecewiseGeodesicPath<P> {
    pub fn to_json<M: Manifold<Point = P>>(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.document::<M>())?)
    }

    pub fn to_json_value<M: Manifold<Point = P>>(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self.document::<M>())?)
    }

    fn document<M: Manifold<Point = P>>(&self) -> PathDocument<P> {
        PathDocument {
            manifold: M::KIND,
            k: self.segments(),
            knots: self.knots.clone(),
        }
    }
}

impl<P: Copy + for<'de> Deserialize<'de>> PiecewiseGeodesicPath<P> {
    /// Parses `{"manifold", "K", "knots"}`, checking the manifold tag and
    /// the knot count.
    pub fn from_json<M: Manifold<Point = P>>(json: &str) -> Result<Self> {
        let doc: PathDocument<P> = serde_json::from_str(json)?;
        if doc.manifold != M::KIND {
            return Err(Error::ManifoldMismatch {
                expected: M::KIND.to_string(),
                found: doc.manifold.to_string(),
            });
        }
        if doc.knots.len() != doc.k + 1 {
            return Err(Error::InvalidConfig(format!(
                "K = {} requires {} knots, found {}",
                doc.k,
                doc.k + 1,
                doc.knots.len()
            )));
        }
        PiecewiseGeodesicPath::new(doc.knots)
    }
}

/// Discretized Brownian-motion prior on paths with `K` pieces.
///
/// The initial knot is uniform on `M`; each subsequent knot is a heat-kernel
/// step of time `c·h` from its predecessor, `c` being the scale of `BM_{ct}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    segments: usize,
    scale: f64,
}

impl PriorSpec {
    pub fn new(segments: usize, scale: f64) -> Result<Self> {
        if segments < 1 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "prior scale c must be positive, got {scale}"
            )));
        }
        Ok(PriorSpec { segments, scale })
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn sidelength(&self) -> f64 {
        1.0 / self.segments as f64
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Heat-kernel time between consecutive knots, `c·h`.
    pub fn step_time(&self) -> f64 {
        self.scale / self.segments as f64
    }

    fn check<P: Copy>(&self, f: &PiecewiseGeodesicPath<P>) -> Result<()> {
        if f.segments() != self.segments {
            return Err(Error::SidelengthMismatch {
                expected: self.segments,
                found: f.segments(),
            });
        }
        Ok(())
    }
}

/// `log π_h(f) = −log μ(M) + Σ_{k=1}^{K} log p_{c·h}(f((k−1)h), f(kh))`.
pub fn log_prior<M: Manifold>(
    f: &PiecewiseGeodesicPath<M::Point>,
    spec: &PriorSpec,
    m: &M,
) -> Result<f64> {
    spec.check(f)?;
    let t = spec.step_time();
    let mut total = -m.volume().ln();
    for w in f.knots().windows(2) {
        total += m.log_heat_kernel(t, &w[0], &w[1])?;
    }
    Ok(total)
}

/// Forward-samples a path: uniform start, then independent heat-kernel
/// increments of time `c·h`.
pub fn sample_prior_path<M: Manifold, R: Rng + ?Sized>(
    spec: &PriorSpec,
    m: &M,
    rng: &mut R,
) -> Result<PiecewiseGeodesicPath<M::Point>> {
    let stepper = m.step_sampler(spec.step_time())?;
    let mut knots = Vec::with_capacity(spec.segments + 1);
    let mut current = m.sample_uniform(rng);
    knots.push(current);
    for _ in 0..spec.segments {
        current = stepper.step(&current, rng);
        knots.push(current);
    }
    PiecewiseGeodesicPath::new(knots)
}
