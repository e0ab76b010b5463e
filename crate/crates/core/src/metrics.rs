//! Function-space metrics, the induced density metric, synthetic data and
//! the contraction-rate sidelength rule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Angle, Circle, HeatStep, Manifold, Sphere, Torus, TorusPoint, UnitVector3};
use crate::path::Curve;
use crate::posterior::{Dataset, Observation};
use crate::quadrature::trapezoid_unit;

/// Density of the predictor `t` on `[0, 1]`, optionally restricted to the
/// set `{t : p(t) ≥ r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorDensity {
    shape: DensityShape,
    restriction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityShape {
    Uniform,
    /// Piecewise-linear interpolation of `(t, p(t))` nodes spanning `[0, 1]`.
    Tabulated(Vec<(f64, f64)>),
}

impl PredictorDensity {
    pub fn uniform() -> Self {
        PredictorDensity {
            shape: DensityShape::Uniform,
            restriction: None,
        }
    }

    pub fn tabulated(nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidConfig("tabulated density needs two nodes".into()));
        }
        if nodes[0].0 != 0.0 || nodes[nodes.len() - 1].0 != 1.0 {
            return Err(Error::InvalidConfig(
                "tabulated density must span exactly [0, 1]".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidConfig(
                "tabulated density nodes must be strictly increasing".into(),
            ));
        }
        if nodes.iter().any(|&(_, v)| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(
                "tabulated density values must be finite and nonnegative".into(),
            ));
        }
        let mass: f64 = nodes
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "tabulated density integrates to {mass}, expected 1"
            )));
        }
        Ok(PredictorDensity {
            shape: DensityShape::Tabulated(nodes),
            restriction: None,
        })
    }

    /// Restricts metric weights to `{t : p(t) ≥ r}`.
    pub fn restricted(mut self, r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidConfig(format!("restriction must be >= 0, got {r}")));
        }
        self.restriction = Some(r);
        Ok(self)
    }

    pub fn restriction(&self) -> Option<f64> {
        self.restriction
    }

    /// Unrestricted density `p(t)`; zero outside `[0, 1]`.
    pub fn density(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match &self.shape {
            DensityShape::Uniform => 1.0,
            DensityShape::Tabulated(nodes) => {
                let i = nodes.partition_point(|&(x, _)| x <= t).clamp(1, nodes.len() - 1);
                let (x0, v0) = nodes[i - 1];
                let (x1, v1) = nodes[i];
                v0 + (t - x0) / (x1 - x0) * (v1 - v0)
            }
        }
    }

    /// Weight used inside the function-space metrics: `p(t)` on the
    /// restriction set, zero elsewhere.
    pub fn weight(&self, t: f64) -> f64 {
        crate::posterior::restricted_weight(t, self, self.restriction.unwrap_or(0.0))
    }

    /// Inverse-CDF draw of `t`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match &self.shape {
            DensityShape::Uniform => u,
            DensityShape::Tabulated(nodes) => {
                let mut remaining = u;
                for w in nodes.windows(2) {
                    let (x0, v0) = w[0];
                    let (x1, v1) = w[1];
                    let width = x1 - x0;
                    let mass = 0.5 * width * (v0 + v1);
                    if remaining <= mass && mass > 0.0 {
                        // solve v0·s + (v1 − v0)·s²/(2w) = remaining for s
                        let a = (v1 - v0) / (2.0 * width);
                        let disc = (v0 * v0 + 4.0 * a * remaining).max(0.0);
                        let s = 2.0 * remaining / (v0 + disc.sqrt());
                        return (x0 + s.clamp(0.0, width)).min(1.0);
                    }
                    remaining -= mass;
                }
                1.0
            }
        }
    }
}

/// Trapezoid rule on `[0, 1]` used for all `t` integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    nodes: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid { nodes: 512 }
    }
}

impl QuadratureGrid {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 32 {
            return Err(Error::InvalidConfig(format!(
                "quadrature grid needs at least 32 nodes, got {nodes}"
            )));
        }
        Ok(QuadratureGrid { nodes })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn rule(&self) -> (Vec<f64>, Vec<f64>) {
        trapezoid_unit(self.nodes)
    }
}

fn check_q(q: f64) -> Result<()> {
    if q >= 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("q must be >= 1, got {q}")))
    }
}

/// `(∫ dist(f(t), g(t))^q w(t) dt)^{1/q}` with `w` the (possibly
/// restricted) predictor density.
pub fn dq_distance<M: Manifold>(
    m: &M,
    f: &impl Curve<M>,
    g: &impl Curve<M>,
    q: f64,
    density: &PredictorDensity,
    grid: &QuadratureGrid,
) -> Result<f64> {
    check_q(q)?;
    let (ts, ws) = grid.rule();
    let mut acc = 0.0;
    for (t, w) in ts.iter().zip(&ws) {
        let weight = density.weight(*t);
        if weight == 0.0 {
            continue;
        }
        let d = m.distance(&f.point_at(m, *t), &g.point_at(m, *t));
        acc += w * weight * d.powf(q);
    }
    Ok(acc.powf(1.0 / q))
}

/// `max_t dist(f(t), g(t))` over the grid nodes and both curves' breakpoints.
pub fn dinf_distance<M: Manifold>(
    m: &M,
    f: &impl Curve<M>,
    g: &impl Curve<M>,
    grid: &QuadratureGrid,
) -> f64 {
    let (mut ts, _) = grid.rule();
    ts.extend(f.breakpoints());
    ts.extend(g.breakpoints());
    ts.into_iter()
        .map(|t| m.distance(&f.point_at(m, t), &g.point_at(m, t)))
        .fold(0.0, f64::max)
}

/// `L¹` error against a reference curve under the uniform predictor density.
pub fn l1_error<M: Manifold>(
    m: &M,
    fit: &impl Curve<M>,
    truth: &impl Curve<M>,
    grid: &QuadratureGrid,
) -> Result<f64> {
    dq_distance(m, fit, truth, 1.0, &PredictorDensity::uniform(), grid)
}

/// Half the `L_q` distance between the joint densities of `(t, x)` induced
/// by `f` and `g`:
/// `½ (∬ |p_{σ²}(f(t), y) − p_{σ²}(g(t), y)|^q w(t)^q dμ(y) dt)^{1/q}`.
#[allow(clippy::too_many_arguments)]
pub fn density_distance<M: Manifold>(
    m: &M,
    f: &impl Curve<M>,
    g: &impl Curve<M>,
    q: f64,
    sigma2: f64,
    density: &PredictorDensity,
    grid: &QuadratureGrid,
    manifold_resolution: usize,
) -> Result<f64> {
    check_q(q)?;
    let (ts, ws) = grid.rule();
    let ys = m.quadrature(manifold_resolution);
    let mut acc = 0.0;
    for (t, w) in ts.iter().zip(&ws) {
        let weight = density.weight(*t);
        if weight == 0.0 {
            continue;
        }
        let a = f.point_at(m, *t);
        let b = g.point_at(m, *t);
        let mut inner = 0.0;
        for (y, wy) in &ys {
            let diff = m.heat_kernel(sigma2, &a, y)? - m.heat_kernel(sigma2, &b, y)?;
            inner += wy * diff.abs().powf(q);
        }
        acc += w * weight.powf(q) * inner;
    }
    Ok(0.5 * acc.powf(1.0 / q))
}

/// Largest difference quotient `|p_t(0, δ+ε) − p_t(0, δ)| / ε` over a
/// `nodes`-point grid of `δ ∈ [0, π]`: a grid estimate of the kernel's
/// Lipschitz constant in its first argument.
pub fn circle_kernel_lipschitz(m: &Circle, t: f64, nodes: usize) -> Result<f64> {
    let step = std::f64::consts::PI / nodes as f64;
    let origin = Angle::new(0.0);
    let mut best: f64 = 0.0;
    let mut prev = m.heat_kernel(t, &origin, &origin)?;
    for i in 1..=nodes {
        let cur = m.heat_kernel(t, &origin, &Angle::new(i as f64 * step))?;
        best = best.max((cur - prev).abs() / step);
        prev = cur;
    }
    Ok(best)
}

/// Draws `n` observations: `t_i ~ p`, `x_i ~ p_{σ²}(f0(t_i), ·)`.
pub fn generate_dataset<M: Manifold, R: Rng + ?Sized>(
    m: &M,
    f0: &impl Curve<M>,
    n: usize,
    sigma2: f64,
    density: &PredictorDensity,
    rng: &mut R,
) -> Result<Dataset<M::Point>> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let stepper = m.step_sampler(sigma2)?;
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let t = density.sample(rng);
        let x = stepper.step(&f0.point_at(m, t), rng);
        obs.push(Observation { t, x });
    }
    Dataset::new(obs)
}

/// Grid size from the contraction-rate sidelength `b_n = n^{−1/2+2ε}`:
/// `K = round(n^{1/2−2ε})` (at least 1) and `h = 1/K`.
pub fn theorem_rate_sidelength(n: usize, epsilon: f64) -> Result<(usize, f64)> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("n must be at least 2, got {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must lie in (0, 1/4), got {epsilon}"
        )));
    }
    let k = ((n as f64).powf(0.5 - 2.0 * epsilon).round() as usize).max(1);
    Ok((k, 1.0 / k as f64))
}

/// Reference regression function used by the experiments.
///
/// On the circle this is `f0(t) = (t + 0.5)²` read as an angle in radians.
/// The torus pairs it with the linear angle `1 + 2t`; the sphere uses it as
/// the azimuth with polar angle `0.5 + t`.
pub trait ReferenceCurve: Manifold {
    fn reference_point(&self, t: f64) -> Self::Point;
}

pub fn quadratic_angle(t: f64) -> f64 {
    (t + 0.5) * (t + 0.5)
}

impl ReferenceCurve for Circle {
    fn reference_point(&self, t: f64) -> Angle {
        Angle::new(quadratic_angle(t))
    }
}

impl ReferenceCurve for Torus {
    fn reference_point(&self, t: f64) -> TorusPoint {
        TorusPoint::new(quadratic_angle(t), 1.0 + 2.0 * t)
    }
}

impl ReferenceCurve for Sphere {
    fn reference_point(&self, t: f64) -> UnitVector3 {
        UnitVector3::from_spherical(0.5 + t, quadratic_angle(t))
    }
}

/// The manifold's [`ReferenceCurve`] as a [`Curve`].
#[derive(Debug, Clone, Copy)]
pub struct Reference;

impl<M: ReferenceCurve> Curve<M> for Reference {
    fn point_at(&self, m: &M, t: f64) -> M::Point {
        m.reference_point(t)
    }
}
