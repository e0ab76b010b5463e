//! Compact Riemannian manifolds used as response spaces.
//!
//! Each manifold exposes its geodesic geometry together with the heat kernel
//! of Brownian motion with generator `Δ/2`: the time-`t` kernel has variance
//! `t` per coordinate in the flat limit, so the noise model `x ~ p_{σ²}(f(t), ·)`
//! reduces to `N(f(t), σ² I)` on `ℝ^D`.

mod circle;
mod sphere;
mod torus;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use circle::{circle_eigen_sum, circle_wrapped_sum, Angle, Circle, WrappedNormalStep};
pub use sphere::{sphere_legendre_sum, PolarInverseCdf, Sphere, UnitVector3};
pub use torus::{Torus, TorusPoint, TorusStep};

/// Distance (in radians) below which two points are treated as equal.
pub const POINT_EQ_TOL: f64 = 1e-12;

/// Slack used to flag a pair as antipodal (non-unique geodesic).
pub const ANTIPODAL_TOL: f64 = 1e-9;

/// Tangent vector. Circle uses the first slot, the torus the first two and
/// the sphere all three (ambient coordinates, orthogonal to the base point).
pub type Tangent = [f64; 3];

/// Runtime tag for the supported manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Circle,
    Sphere,
    Torus,
}

impl ManifoldKind {
    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Circle => "circle",
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::Torus => "torus",
        }
    }

    /// Number of coordinates used to store a point.
    pub fn coord_count(self) -> usize {
        match self {
            ManifoldKind::Circle => 1,
            ManifoldKind::Sphere => 3,
            ManifoldKind::Torus => 2,
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "circle" | "s1" => Ok(ManifoldKind::Circle),
            "sphere" | "s2" => Ok(ManifoldKind::Sphere),
            "torus" | "t2" => Ok(ManifoldKind::Torus),
            other => Err(Error::InvalidConfig(format!("unknown manifold `{other}`"))),
        }
    }
}

/// Controls the truncated series used to evaluate heat kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelConfig {
    /// Hard cap on the number of series terms.
    pub truncation_order: usize,
    /// Truncate once the magnitude bound of the next term drops below this.
    pub series_tolerance: f64,
    /// Circle only: image sum below this time, eigen sum at or above it.
    pub representation_switch_time: f64,
    /// Constant added to every kernel value. Only used to inject faults
    /// into the kernel self-checks; must be zero otherwise.
    #[doc(hidden)]
    #[serde(default, skip_serializing_if = "is_zero")]
    pub density_offset: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl Default for HeatKernelConfig {
    fn default() -> Self {
        HeatKernelConfig {
            truncation_order: 200,
            series_tolerance: 1e-14,
            representation_switch_time: 1.0,
            density_offset: 0.0,
        }
    }
}

impl HeatKernelConfig {
    pub fn new(
        truncation_order: usize,
        series_tolerance: f64,
        representation_switch_time: f64,
    ) -> Result<Self> {
        let cfg = HeatKernelConfig {
            truncation_order,
            series_tolerance,
            representation_switch_time,
            density_offset: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation_order < 1 {
            return Err(Error::InvalidConfig("truncation_order must be >= 1".into()));
        }
        if !(self.series_tolerance > 0.0 && self.series_tolerance < 1e-8) {
            return Err(Error::InvalidConfig(
                "series_tolerance must lie in (0, 1e-8)".into(),
            ));
        }
        if !(self.representation_switch_time > 0.0 && self.representation_switch_time.is_finite())
        {
            return Err(Error::InvalidConfig(
                "representation_switch_time must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Number of series terms the adaptive truncation needs at time `t`
    /// before the term bound `(2l+1)/(4π) e^{−l(l+1)t/2}` drops below the
    /// tolerance.
    pub fn terms_needed(&self, t: f64) -> usize {
        let mut l = 1usize;
        loop {
            let lf = l as f64;
            let bound = (2.0 * lf + 1.0) / (4.0 * std::f64::consts::PI) * (-lf * (lf + 1.0) * t / 2.0).exp();
            if bound < self.series_tolerance || l >= 1_000_000 {
                return l;
            }
            l += 1;
        }
    }

    /// Copy with the truncation cap raised, if needed, so that series
    /// evaluated at times `≥ t` are not cut short by the cap.
    pub fn covering_time(mut self, t: f64) -> Self {
        if t > 0.0 && t.is_finite() {
            self.truncation_order = self.truncation_order.max(self.terms_needed(t));
        }
        self
    }

    /// Copy of this config with a constant added to every kernel value.
    #[doc(hidden)]
    pub fn with_density_offset(mut self, offset: f64) -> Self {
        self.density_offset = offset;
        self
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTime(t))
    }
}

/// Draws heat-kernel steps of one fixed time from arbitrary starting points.
///
/// Building a sampler may be expensive (the sphere tabulates an inverse CDF),
/// so callers that take many steps of the same time should keep one around.
pub trait HeatStep<P>: Clone + Send + Sync {
    fn time(&self) -> f64;
    fn step<R: Rng + ?Sized>(&self, from: &P, rng: &mut R) -> P;
}

/// A compact Riemannian manifold with its Brownian-motion heat kernel.
pub trait Manifold: Clone + fmt::Debug + Send + Sync {
    type Point: Copy + fmt::Debug + PartialEq + Send + Sync + Serialize + DeserializeOwned;
    type Step: HeatStep<Self::Point>;

    const KIND: ManifoldKind;

    fn config(&self) -> &HeatKernelConfig;

    fn dimension(&self) -> usize;

    /// Riemannian volume `μ(M)`.
    fn volume(&self) -> f64;

    /// Largest possible geodesic distance.
    fn diameter(&self) -> f64;

    fn distance(&self, x: &Self::Point, y: &Self::Point) -> f64;

    /// True when the minimizing geodesic from `x` to `y` is not unique.
    fn is_antipodal(&self, x: &Self::Point, y: &Self::Point) -> bool;

    /// Point at fraction `s` along the minimizing geodesic from `x` to `y`.
    /// Antipodal pairs are resolved by a fixed tie-break (see the concrete
    /// manifolds); use [`Manifold::try_interpolate`] to reject them instead.
    fn interpolate(&self, x: &Self::Point, y: &Self::Point, s: f64) -> Self::Point;

    fn try_interpolate(&self, x: &Self::Point, y: &Self::Point, s: f64) -> Result<Self::Point> {
        if self.is_antipodal(x, y) {
            Err(Error::AntipodalPair)
        } else {
            Ok(self.interpolate(x, y, s))
        }
    }

    fn log_map(&self, base: &Self::Point, y: &Self::Point) -> Tangent;

    fn exp_map(&self, base: &Self::Point, v: &Tangent) -> Self::Point;

    /// Density of `p_t(x, ·)` with respect to the Riemannian measure.
    fn heat_kernel(&self, t: f64, x: &Self::Point, y: &Self::Point) -> Result<f64>;

    /// Natural log of [`Manifold::heat_kernel`], evaluated without underflow
    /// where the representation allows it.
    fn log_heat_kernel(&self, t: f64, x: &Self::Point, y: &Self::Point) -> Result<f64> {
        Ok(self.heat_kernel(t, x, y)?.ln())
    }

    fn step_sampler(&self, t: f64) -> Result<Self::Step>;

    fn sample_heat_kernel<R: Rng + ?Sized>(
        &self,
        t: f64,
        x: &Self::Point,
        rng: &mut R,
    ) -> Result<Self::Point> {
        Ok(self.step_sampler(t)?.step(x, rng))
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;

    /// Quadrature rule `(node, weight)` for integrals against `μ`.
    /// `resolution` is the per-axis node count.
    fn quadrature(&self, resolution: usize) -> Vec<(Self::Point, f64)>;

    /// Coordinates as written to CSV (`coord1[,coord2,coord3]`).
    fn coords(&self, p: &Self::Point) -> Vec<f64>;

    fn point_from_coords(&self, coords: &[f64]) -> Result<Self::Point>;

    fn points_equal(&self, x: &Self::Point, y: &Self::Point) -> bool {
        self.distance(x, y) <= POINT_EQ_TOL
    }

}

pub(crate) fn tangent_norm(v: &Tangent) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}
