use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{
    check_time, tangent_norm, HeatKernelConfig, HeatStep, Manifold, ManifoldKind, Tangent,
    ANTIPODAL_TOL,
};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, periodic_trapezoid};

/// A point on the unit sphere `S² ⊂ ℝ³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3([f64; 3]);

impl UnitVector3 {
    /// Normalizes `v`; fails on zero or non-finite input.
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let n = norm(&v);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidPoint(format!("cannot normalize {v:?}")));
        }
        Ok(UnitVector3([v[0] / n, v[1] / n, v[2] / n]))
    }

    /// Point with polar angle `theta` from `+z` and azimuth `phi`.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        UnitVector3([st * cp, st * sp, ct])
    }

    pub fn north() -> Self {
        UnitVector3([0.0, 0.0, 1.0])
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        dot(&self.0, &other.0)
    }

    fn renormalized(v: [f64; 3]) -> Self {
        let n = norm(&v);
        UnitVector3([v[0] / n, v[1] / n, v[2] / n])
    }
}

impl Serialize for UnitVector3 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for UnitVector3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 3]>::deserialize(d)?;
        UnitVector3::new(v).map_err(serde::de::Error::custom)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Legendre expansion `Σ_l (2l+1)/(4π) e^{-l(l+1)t/2} P_l(u)` of the sphere
/// heat kernel, where `u` is the cosine of the angle between the two points.
pub fn sphere_legendre_sum(t: f64, u: f64, cfg: &HeatKernelConfig) -> f64 {
    let inv4pi = 1.0 / (4.0 * PI);
    let mut p_prev = 1.0;
    let mut p_cur = u;
    let mut sum = inv4pi;
    for l in 1..=cfg.truncation_order {
        let lf = l as f64;
        if l >= 2 {
            let p_next = ((2.0 * lf - 1.0) * u * p_cur - (lf - 1.0) * p_prev) / lf;
            p_prev = p_cur;
            p_cur = p_next;
        }
        let bound = (2.0 * lf + 1.0) * inv4pi * (-lf * (lf + 1.0) * t / 2.0).exp();
        sum += bound * p_cur;
        if bound < cfg.series_tolerance {
            break;
        }
    }
    sum
}

/// The unit sphere `S²` with surface measure (`μ(S²) = 4π`).
///
/// Kernel values come from the truncated Legendre series, which is accurate
/// for `t ≥ 0.01` with the default 200-term cap. Round-off can leave the sum
/// non-positive far from the center at small times; such values are clamped
/// to the smallest positive double.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sphere {
    config: HeatKernelConfig,
}

impl Sphere {
    pub fn new() -> Self {
        Sphere::default()
    }

    pub fn with_config(config: HeatKernelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Sphere { config })
    }

    pub(crate) fn kernel_at_cos(&self, t: f64, u: f64) -> f64 {
        let p = sphere_legendre_sum(t, u.clamp(-1.0, 1.0), &self.config);
        p.max(f64::MIN_POSITIVE) + self.config.density_offset
    }
}

/// Samples `p_t(x, ·)` by drawing the polar angle about `x` from a tabulated
/// inverse CDF and the azimuth uniformly.
#[derive(Debug, Clone)]
pub struct PolarInverseCdf {
    time: f64,
    angles: Arc<[f64]>,
    cdf: Arc<[f64]>,
}

impl PolarInverseCdf {
    pub const NODES: usize = 2048;

    pub fn new(sphere: &Sphere, t: f64) -> Result<Self> {
        check_time(t)?;
        // beyond 12 standard deviations the polar density is below e^-72
        let max_angle = (12.0 * t.sqrt()).min(PI);
        // the table is built once per time, so always use enough series terms
        let config = sphere.config.covering_time(t);
        let n = Self::NODES;
        let step = max_angle / (n - 1) as f64;
        let angles: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        let density: Vec<f64> = angles
            .iter()
            .map(|&a| sphere_legendre_sum(t, a.cos(), &config).max(0.0) * a.sin())
            .collect();
        let mut cdf = Vec::with_capacity(n);
        cdf.push(0.0);
        for i in 1..n {
            let prev = cdf[i - 1];
            cdf.push(prev + 0.5 * step * (density[i - 1] + density[i]));
        }
        let total = cdf[n - 1];
        if !(total > 0.0) {
            return Err(Error::InvalidTime(t));
        }
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Ok(PolarInverseCdf {
            time: t,
            angles: angles.into(),
            cdf: cdf.into(),
        })
    }

    /// Polar angle for a uniform draw `u ∈ [0, 1)`.
    pub fn polar_angle(&self, u: f64) -> f64 {
        let idx = self.cdf.partition_point(|&c| c <= u);
        if idx == 0 {
            return 0.0;
        }
        if idx >= self.cdf.len() {
            return self.angles[self.angles.len() - 1];
        }
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let (a0, a1) = (self.angles[idx - 1], self.angles[idx]);
        if c1 > c0 {
            a0 + (u - c0) / (c1 - c0) * (a1 - a0)
        } else {
            a0
        }
    }
}

/// Orthonormal pair spanning the tangent plane at `x`.
fn tangent_frame(x: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let axis = fallback_axis(x);
    let e1 = orthogonal_unit(&axis, x);
    let e2 = cross(x, &e1);
    (e1, e2)
}

/// Smallest-index coordinate axis not parallel to `x`.
fn fallback_axis(x: &[f64; 3]) -> [f64; 3] {
    for i in 0..3 {
        if x[i].abs() < 1.0 - 1e-6 {
            let mut e = [0.0; 3];
            e[i] = 1.0;
            return e;
        }
    }
    unreachable!("a unit vector is parallel to at most one axis")
}

fn orthogonal_unit(v: &[f64; 3], x: &[f64; 3]) -> [f64; 3] {
    let c = dot(v, x);
    let w = [v[0] - c * x[0], v[1] - c * x[1], v[2] - c * x[2]];
    let n = norm(&w);
    [w[0] / n, w[1] / n, w[2] / n]
}

impl HeatStep<UnitVector3> for PolarInverseCdf {
    fn time(&self) -> f64 {
        self.time
    }

    fn step<R: Rng + ?Sized>(&self, from: &UnitVector3, rng: &mut R) -> UnitVector3 {
        let theta = self.polar_angle(rng.random::<f64>());
        let phi = rng.random::<f64>() * TAU;
        let x = from.0;
        let (e1, e2) = tangent_frame(&x);
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let v = [
            ct * x[0] + st * (cp * e1[0] + sp * e2[0]),
            ct * x[1] + st * (cp * e1[1] + sp * e2[1]),
            ct * x[2] + st * (cp * e1[2] + sp * e2[2]),
        ];
        UnitVector3::renormalized(v)
    }
}

impl Manifold for Sphere {
    type Point = UnitVector3;
    type Step = PolarInverseCdf;

    const KIND: ManifoldKind = ManifoldKind::Sphere;

    fn config(&self) -> &HeatKernelConfig {
        &self.config
    }

    fn dimension(&self) -> usize {
        2
    }

    fn volume(&self) -> f64 {
        4.0 * PI
    }

    fn diameter(&self) -> f64 {
        PI
    }

    fn distance(&self, x: &UnitVector3, y: &UnitVector3) -> f64 {
        let s = norm(&cross(&x.0, &y.0));
        s.atan2(x.dot(y))
    }

    fn is_antipodal(&self, x: &UnitVector3, y: &UnitVector3) -> bool {
        PI - self.distance(x, y) <= ANTIPODAL_TOL
    }

    /// Antipodal pairs follow the great circle through `x` and the
    /// smallest-index coordinate axis not parallel to `x`.
    fn interpolate(&self, x: &UnitVector3, y: &UnitVector3, s: f64) -> UnitVector3 {
        if s == 0.0 {
            return *x;
        }
        if s == 1.0 {
            return *y;
        }
        if self.is_antipodal(x, y) {
            let u = orthogonal_unit(&fallback_axis(&x.0), &x.0);
            let a = s * PI;
            let (sa, ca) = a.sin_cos();
            return UnitVector3::renormalized([
                ca * x.0[0] + sa * u[0],
                ca * x.0[1] + sa * u[1],
                ca * x.0[2] + sa * u[2],
            ]);
        }
        let v = self.log_map(x, y);
        self.exp_map(x, &[s * v[0], s * v[1], s * v[2]])
    }

    fn log_map(&self, base: &UnitVector3, y: &UnitVector3) -> Tangent {
        let x = base.0;
        let c = base.dot(y);
        let w = [y.0[0] - c * x[0], y.0[1] - c * x[1], y.0[2] - c * x[2]];
        let wn = norm(&w);
        let angle = self.distance(base, y);
        if wn < 1e-300 {
            return [0.0; 3];
        }
        let k = angle / wn;
        [k * w[0], k * w[1], k * w[2]]
    }

    fn exp_map(&self, base: &UnitVector3, v: &Tangent) -> UnitVector3 {
        let len = tangent_norm(v);
        if len == 0.0 {
            return *base;
        }
        let (s, c) = len.sin_cos();
        let x = base.0;
        UnitVector3::renormalized([
            c * x[0] + s * v[0] / len,
            c * x[1] + s * v[1] / len,
            c * x[2] + s * v[2] / len,
        ])
    }

    fn heat_kernel(&self, t: f64, x: &UnitVector3, y: &UnitVector3) -> Result<f64> {
        check_time(t)?;
        Ok(self.kernel_at_cos(t, x.dot(y)))
    }

    fn step_sampler(&self, t: f64) -> Result<PolarInverseCdf> {
        PolarInverseCdf::new(self, t)
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitVector3 {
        let z = 2.0 * rng.random::<f64>() - 1.0;
        let phi = rng.random::<f64>() * TAU;
        let r = (1.0 - z * z).max(0.0).sqrt();
        UnitVector3::renormalized([r * phi.cos(), r * phi.sin(), z])
    }

    /// Gauss–Legendre in the polar cosine times a `2·resolution`-node
    /// periodic trapezoid in azimuth.
    fn quadrature(&self, resolution: usize) -> Vec<(UnitVector3, f64)> {
        let (zs, wz) = gauss_legendre(resolution);
        let (phis, wphi) = periodic_trapezoid(2 * resolution);
        let mut out = Vec::with_capacity(zs.len() * phis.len());
        for (z, w) in zs.iter().zip(&wz) {
            let r = (1.0 - z * z).max(0.0).sqrt();
            for phi in &phis {
                let p = UnitVector3([r * phi.cos(), r * phi.sin(), *z]);
                out.push((p, w * wphi));
            }
        }
        out
    }

    fn coords(&self, p: &UnitVector3) -> Vec<f64> {
        p.0.to_vec()
    }

    fn point_from_coords(&self, coords: &[f64]) -> Result<UnitVector3> {
        match coords {
            [a, b, c] => {
                let v = [*a, *b, *c];
                let n = norm(&v);
                if (n - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidPoint(format!(
                        "sphere point {v:?} has norm {n}, expected 1"
                    )));
                }
                UnitVector3::new(v)
            }
            _ => Err(Error::InvalidPoint(format!(
                "sphere point needs three coordinates, got {coords:?}"
            ))),
        }
    }
}
