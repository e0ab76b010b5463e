use std::f64::consts::{PI, SQRT_2, TAU};

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::circle::{circle_antipodal, circle_interpolate};
use super::{
    check_time, Angle, Circle, HeatKernelConfig, HeatStep, Manifold, ManifoldKind, Tangent,
    WrappedNormalStep,
};
use crate::error::{Error, Result};
use crate::quadrature::periodic_trapezoid;

/// A point on the flat torus `S¹ × S¹`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TorusPoint(pub Angle, pub Angle);

impl TorusPoint {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        TorusPoint(Angle::new(theta1), Angle::new(theta2))
    }
}

impl Serialize for TorusPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0.radians(), self.1.radians()].serialize(s)
    }
}

impl<'de> Deserialize<'de> for TorusPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b] = <[f64; 2]>::deserialize(d)?;
        if !(a.is_finite() && b.is_finite()) {
            return Err(serde::de::Error::custom("torus coordinates must be finite"));
        }
        Ok(TorusPoint::new(a, b))
    }
}

/// The flat torus `S¹ × S¹` (`μ = 4π²`). Its heat kernel is the product of
/// two circle kernels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Torus {
    circle: Circle,
}

impl Torus {
    pub fn new() -> Self {
        Torus::default()
    }

    pub fn with_config(config: HeatKernelConfig) -> Result<Self> {
        Ok(Torus {
            circle: Circle::with_config(config)?,
        })
    }

    pub fn factor(&self) -> &Circle {
        &self.circle
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TorusStep(WrappedNormalStep);

impl HeatStep<TorusPoint> for TorusStep {
    fn time(&self) -> f64 {
        self.0.time()
    }

    fn step<R: Rng + ?Sized>(&self, from: &TorusPoint, rng: &mut R) -> TorusPoint {
        let a = self.0.draw_offset(rng);
        let b = self.0.draw_offset(rng);
        TorusPoint(from.0.rotated(a), from.1.rotated(b))
    }
}

impl Manifold for Torus {
    type Point = TorusPoint;
    type Step = TorusStep;

    const KIND: ManifoldKind = ManifoldKind::Torus;

    fn config(&self) -> &HeatKernelConfig {
        self.circle.config()
    }

    fn dimension(&self) -> usize {
        2
    }

    fn volume(&self) -> f64 {
        TAU * TAU
    }

    fn diameter(&self) -> f64 {
        PI * SQRT_2
    }

    fn distance(&self, x: &TorusPoint, y: &TorusPoint) -> f64 {
        let a = x.0.arc_to(y.0);
        let b = x.1.arc_to(y.1);
        a.hypot(b)
    }

    /// Antipodal along either coordinate.
    fn is_antipodal(&self, x: &TorusPoint, y: &TorusPoint) -> bool {
        circle_antipodal(x.0, y.0) || circle_antipodal(x.1, y.1)
    }

    /// Each coordinate follows the circle rule, including its
    /// counterclockwise tie-break.
    fn interpolate(&self, x: &TorusPoint, y: &TorusPoint, s: f64) -> TorusPoint {
        TorusPoint(
            circle_interpolate(x.0, y.0, s),
            circle_interpolate(x.1, y.1, s),
        )
    }

    fn log_map(&self, base: &TorusPoint, y: &TorusPoint) -> Tangent {
        [base.0.delta_to(y.0), base.1.delta_to(y.1), 0.0]
    }

    fn exp_map(&self, base: &TorusPoint, v: &Tangent) -> TorusPoint {
        TorusPoint(base.0.rotated(v[0]), base.1.rotated(v[1]))
    }

    fn heat_kernel(&self, t: f64, x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
        check_time(t)?;
        let offset = self.config().density_offset;
        let a = self.circle.kernel_at_arc(t, x.0.arc_to(y.0)) - offset;
        let b = self.circle.kernel_at_arc(t, x.1.arc_to(y.1)) - offset;
        Ok(a * b + offset)
    }

    fn log_heat_kernel(&self, t: f64, x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
        check_time(t)?;
        if self.config().density_offset != 0.0 {
            return Ok(self.heat_kernel(t, x, y)?.ln());
        }
        Ok(self.circle.log_kernel_at_arc(t, x.0.arc_to(y.0))
            + self.circle.log_kernel_at_arc(t, x.1.arc_to(y.1)))
    }

    fn step_sampler(&self, t: f64) -> Result<TorusStep> {
        Ok(TorusStep(WrappedNormalStep::new(t)?))
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> TorusPoint {
        let a = self.circle.sample_uniform(rng);
        let b = self.circle.sample_uniform(rng);
        TorusPoint(a, b)
    }

    fn quadrature(&self, resolution: usize) -> Vec<(TorusPoint, f64)> {
        let (nodes, w) = periodic_trapezoid(resolution);
        let mut out = Vec::with_capacity(resolution * resolution);
        for a in &nodes {
            for b in &nodes {
                out.push((TorusPoint::new(*a, *b), w * w));
            }
        }
        out
    }

    fn coords(&self, p: &TorusPoint) -> Vec<f64> {
        vec![p.0.radians(), p.1.radians()]
    }

    fn point_from_coords(&self, coords: &[f64]) -> Result<TorusPoint> {
        match coords {
            [a, b] if a.is_finite() && b.is_finite() => Ok(TorusPoint::new(*a, *b)),
            _ => Err(Error::InvalidPoint(format!(
                "torus point needs two finite coordinates, got {coords:?}"
            ))),
        }
    }
}
