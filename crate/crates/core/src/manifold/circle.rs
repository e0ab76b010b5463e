use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{check_time, HeatKernelConfig, HeatStep, Manifold, ManifoldKind, Tangent, ANTIPODAL_TOL};
use crate::error::{Error, Result};
use crate::quadrature::periodic_trapezoid;

/// A point on the unit circle, stored as an angle in `[0, 2π)`.
#[derive(Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    /// Wraps `theta` into `[0, 2π)`.
    pub fn new(theta: f64) -> Self {
        let mut r = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        if r >= TAU {
            r = 0.0;
        }
        Angle(r)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn rotated(self, by: f64) -> Self {
        Angle::new(self.0 + by)
    }

    /// Signed shortest arc from `self` to `to`, in `(-π, π]`. An exactly
    /// antipodal target yields `+π` (counterclockwise).
    pub fn delta_to(self, to: Angle) -> f64 {
        let d = (to.0 - self.0).rem_euclid(TAU);
        if d > PI {
            d - TAU
        } else {
            d
        }
    }

    /// Unsigned arc length in `[0, π]`; bitwise symmetric in its arguments.
    pub fn arc_to(self, other: Angle) -> f64 {
        let (lo, hi) = if self.0 <= other.0 {
            (self.0, other.0)
        } else {
            (other.0, self.0)
        };
        let d = hi - lo;
        d.min(TAU - d)
    }
}

impl fmt::Debug for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Angle({})", self.0)
    }
}

impl From<f64> for Angle {
    fn from(theta: f64) -> Self {
        Angle::new(theta)
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let theta = f64::deserialize(d)?;
        if !theta.is_finite() {
            return Err(serde::de::Error::custom("angle must be finite"));
        }
        Ok(Angle::new(theta))
    }
}

/// Image-sum (wrapped Gaussian) form of the circle heat kernel at arc
/// distance `delta ∈ [0, π]`.
pub fn circle_wrapped_sum(t: f64, delta: f64, cfg: &HeatKernelConfig) -> f64 {
    log_wrapped_sum(t, delta, cfg).exp()
}

fn log_wrapped_sum(t: f64, delta: f64, cfg: &HeatKernelConfig) -> f64 {
    let log_norm = -0.5 * (TAU * t).ln();
    let lead = -delta * delta / (2.0 * t);
    let prefactor = log_norm.exp();
    let mut rest = 0.0;
    for k in 1..=cfg.truncation_order {
        let shift = TAU * k as f64;
        let minus = (delta - shift).powi(2);
        let plus = (delta + shift).powi(2);
        let a = (-minus / (2.0 * t)).exp();
        let b = (-plus / (2.0 * t)).exp();
        rest += (-minus / (2.0 * t) - lead).exp() + (-plus / (2.0 * t) - lead).exp();
        if prefactor * a.max(b) < cfg.series_tolerance {
            break;
        }
    }
    log_norm + lead + rest.ln_1p()
}

/// Eigenfunction (Fourier) form of the circle heat kernel at arc distance
/// `delta`.
pub fn circle_eigen_sum(t: f64, delta: f64, cfg: &HeatKernelConfig) -> f64 {
    let mut sum = 1.0;
    for m in 1..=cfg.truncation_order {
        let mf = m as f64;
        let decay = (-mf * mf * t / 2.0).exp();
        sum += 2.0 * decay * (mf * delta).cos();
        if 2.0 * decay / TAU < cfg.series_tolerance {
            break;
        }
    }
    sum / TAU
}

/// The unit circle `S¹` with arc-length measure (`μ(S¹) = 2π`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circle {
    config: HeatKernelConfig,
}

impl Circle {
    pub fn new() -> Self {
        Circle::default()
    }

    pub fn with_config(config: HeatKernelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Circle { config })
    }

    pub(crate) fn kernel_at_arc(&self, t: f64, delta: f64) -> f64 {
        let cfg = &self.config;
        let p = if t < cfg.representation_switch_time {
            circle_wrapped_sum(t, delta, cfg)
        } else {
            circle_eigen_sum(t, delta, cfg)
        };
        p + cfg.density_offset
    }

    pub(crate) fn log_kernel_at_arc(&self, t: f64, delta: f64) -> f64 {
        let cfg = &self.config;
        if cfg.density_offset != 0.0 {
            return self.kernel_at_arc(t, delta).ln();
        }
        if t < cfg.representation_switch_time {
            log_wrapped_sum(t, delta, cfg)
        } else {
            circle_eigen_sum(t, delta, cfg).ln()
        }
    }
}

/// Wrapped-normal step: `θ + √t·Z (mod 2π)` is an exact draw from `p_t(θ, ·)`.
#[derive(Debug, Clone, Copy)]
pub struct WrappedNormalStep {
    time: f64,
    sd: f64,
}

impl WrappedNormalStep {
    pub fn new(t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(WrappedNormalStep {
            time: t,
            sd: t.sqrt(),
        })
    }

    pub(crate) fn draw_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.sd * z
    }
}

impl HeatStep<Angle> for WrappedNormalStep {
    fn time(&self) -> f64 {
        self.time
    }

    fn step<R: Rng + ?Sized>(&self, from: &Angle, rng: &mut R) -> Angle {
        from.rotated(self.draw_offset(rng))
    }
}

pub(crate) fn circle_interpolate(x: Angle, y: Angle, s: f64) -> Angle {
    if s == 0.0 {
        return x;
    }
    if s == 1.0 {
        return y;
    }
    x.rotated(s * x.delta_to(y))
}

pub(crate) fn circle_antipodal(x: Angle, y: Angle) -> bool {
    (x.arc_to(y) - PI).abs() <= ANTIPODAL_TOL
}

impl Manifold for Circle {
    type Point = Angle;
    type Step = WrappedNormalStep;

    const KIND: ManifoldKind = ManifoldKind::Circle;

    fn config(&self) -> &HeatKernelConfig {
        &self.config
    }

    fn dimension(&self) -> usize {
        1
    }

    fn volume(&self) -> f64 {
        TAU
    }

    fn diameter(&self) -> f64 {
        PI
    }

    fn distance(&self, x: &Angle, y: &Angle) -> f64 {
        x.arc_to(*y)
    }

    fn is_antipodal(&self, x: &Angle, y: &Angle) -> bool {
        circle_antipodal(*x, *y)
    }

    /// Antipodal pairs follow the counterclockwise arc from `x`.
    fn interpolate(&self, x: &Angle, y: &Angle, s: f64) -> Angle {
        circle_interpolate(*x, *y, s)
    }

    fn log_map(&self, base: &Angle, y: &Angle) -> Tangent {
        [base.delta_to(*y), 0.0, 0.0]
    }

    fn exp_map(&self, base: &Angle, v: &Tangent) -> Angle {
        base.rotated(v[0])
    }

    fn heat_kernel(&self, t: f64, x: &Angle, y: &Angle) -> Result<f64> {
        check_time(t)?;
        Ok(self.kernel_at_arc(t, x.arc_to(*y)))
    }

    fn log_heat_kernel(&self, t: f64, x: &Angle, y: &Angle) -> Result<f64> {
        check_time(t)?;
        Ok(self.log_kernel_at_arc(t, x.arc_to(*y)))
    }

    fn step_sampler(&self, t: f64) -> Result<WrappedNormalStep> {
        WrappedNormalStep::new(t)
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Angle {
        Angle::new(rng.random::<f64>() * TAU)
    }

    fn quadrature(&self, resolution: usize) -> Vec<(Angle, f64)> {
        let (nodes, w) = periodic_trapezoid(resolution);
        nodes.into_iter().map(|th| (Angle::new(th), w)).collect()
    }

    fn coords(&self, p: &Angle) -> Vec<f64> {
        vec![p.radians()]
    }

    fn point_from_coords(&self, coords: &[f64]) -> Result<Angle> {
        match coords {
            [theta] if theta.is_finite() => Ok(Angle::new(*theta)),
            _ => Err(Error::InvalidPoint(format!(
                "circle point needs one finite coordinate, got {coords:?}"
            ))),
        }
    }
}
