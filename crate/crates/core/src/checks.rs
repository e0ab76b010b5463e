//! Numerical self-checks of the heat kernels and path metrics.
//!
//! Each check compares an identity the kernels must satisfy against a
//! tolerance and records the worst error seen; [`run_kernel_checks`] bundles
//! them into a report for the `check-kernels` command.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::manifold::{
    circle_eigen_sum, circle_wrapped_sum, Angle, Circle, HeatKernelConfig, Manifold, ManifoldKind,
    Sphere, Torus, TorusPoint, UnitVector3,
};
use crate::metrics::{dinf_distance, dq_distance, PredictorDensity, QuadratureGrid};
use crate::path::{sample_prior_path, PriorSpec};

/// Times at which the kernel identities are checked.
pub const CHECK_TIMES: [f64; 4] = [0.05, 0.1, 0.5, 2.0];

pub const CROSS_REP_TOL: f64 = 1e-10;
pub const NORMALIZATION_TOL: f64 = 1e-8;
pub const SEMIGROUP_TOL: f64 = 1e-6;
pub const ISOMETRY_TOL: f64 = 1e-10;
pub const METRIC_SLACK: f64 = 1e-10;

/// Outcome of a single identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub manifold: Option<ManifoldKind>,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &'static str, manifold: Option<ManifoldKind>, max_error: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name,
            manifold,
            max_error,
            tolerance,
            // NaN fails
            passed: max_error <= tolerance,
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scope = self.manifold.map(|k| k.name()).unwrap_or("metrics");
        write!(
            f,
            "{} {:<22} {:<7} max_error={:.3e} tol={:.0e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            scope,
            self.max_error,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KernelCheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl KernelCheckReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    /// Worst semigroup error across all manifolds.
    pub fn semigroup_max_error(&self) -> f64 {
        self.outcomes
            .iter()
            .filter(|o| o.name == "semigroup")
            .map(|o| o.max_error)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

impl fmt::Display for KernelCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "{o}")?;
        }
        write!(
            f,
            "semigroup max error {:.3e}; {}",
            self.semigroup_max_error(),
            if self.passed() { "all checks passed" } else { "CHECKS FAILED" }
        )
    }
}

/// A point map of a manifold onto itself.
pub type PointMap<P> = Box<dyn Fn(&P) -> P>;

/// Manifolds with a family of isometries to test kernel invariance against.
pub trait Isometries: Manifold {
    /// Draws a random isometry of the manifold.
    fn random_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> PointMap<Self::Point>;
}

impl Isometries for Circle {
    fn random_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> Box<dyn Fn(&Angle) -> Angle> {
        let shift = rng.random::<f64>() * TAU;
        if rng.random::<bool>() {
            Box::new(move |a: &Angle| a.rotated(shift))
        } else {
            Box::new(move |a: &Angle| Angle::new(shift - a.radians()))
        }
    }
}

impl Isometries for Torus {
    fn random_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> Box<dyn Fn(&TorusPoint) -> TorusPoint> {
        let (s1, s2) = (rng.random::<f64>() * TAU, rng.random::<f64>() * TAU);
        let swap = rng.random::<bool>();
        Box::new(move |p: &TorusPoint| {
            let (a, b) = if swap { (p.1, p.0) } else { (p.0, p.1) };
            TorusPoint(a.rotated(s1), b.rotated(s2))
        })
    }
}

impl Isometries for Sphere {
    fn random_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> Box<dyn Fn(&UnitVector3) -> UnitVector3> {
        let axis = self.sample_uniform(rng).as_array();
        let angle = rng.random::<f64>() * TAU;
        let (s, c) = angle.sin_cos();
        Box::new(move |p: &UnitVector3| {
            // Rodrigues' rotation formula
            let v = p.as_array();
            let kv = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
            let cross = [
                axis[1] * v[2] - axis[2] * v[1],
                axis[2] * v[0] - axis[0] * v[2],
                axis[0] * v[1] - axis[1] * v[0],
            ];
            let mut out = [0.0; 3];
            for i in 0..3 {
                out[i] = v[i] * c + cross[i] * s + axis[i] * kv * (1.0 - c);
            }
            UnitVector3::new(out).expect("rotation preserves the norm")
        })
    }
}

/// Largest `|wrapped − eigen|` over `times × angles`.
pub fn circle_cross_representation_error(cfg: &HeatKernelConfig, times: &[f64], angles: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in times {
        for j in 0..angles {
            let delta = -PI + TAU * j as f64 / angles as f64;
            let diff = (circle_wrapped_sum(t, delta, cfg) - circle_eigen_sum(t, delta, cfg)).abs();
            worst = worst.max(if diff.is_nan() { f64::INFINITY } else { diff });
        }
    }
    worst
}

/// `n` log-spaced times spanning `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Largest `|∫ p_t(x, y) dμ(y) − 1|` over `centers` and `times`.
pub fn normalization_error<M: Manifold>(
    m: &M,
    centers: &[M::Point],
    times: &[f64],
    resolution: usize,
) -> Result<f64> {
    let ys = m.quadrature(resolution);
    let mut worst: f64 = 0.0;
    for &t in times {
        for x in centers {
            let mut mass = 0.0;
            for (y, w) in &ys {
                mass += w * m.heat_kernel(t, x, y)?;
            }
            worst = worst.max(nan_to_inf((mass - 1.0).abs()));
        }
    }
    Ok(worst)
}

/// Largest `|∫ p_{t/2}(x, z) p_{t/2}(z, y) dμ(z) − p_t(x, y)|` over
/// `pairs` and `times`.
pub fn semigroup_error<M: Manifold>(
    m: &M,
    pairs: &[(M::Point, M::Point)],
    times: &[f64],
    resolution: usize,
) -> Result<f64> {
    let zs = m.quadrature(resolution);
    let mut worst: f64 = 0.0;
    for &t in times {
        let s = t / 2.0;
        for (x, y) in pairs {
            let mut conv = 0.0;
            for (z, w) in &zs {
                conv += w * m.heat_kernel(s, x, z)? * m.heat_kernel(s, z, y)?;
            }
            let direct = m.heat_kernel(t, x, y)?;
            worst = worst.max(nan_to_inf((conv - direct).abs()));
        }
    }
    Ok(worst)
}

/// Number of pairs where `p_t(x, y) != p_t(y, x)` bit for bit.
pub fn symmetry_violations<M: Manifold>(
    m: &M,
    pairs: &[(M::Point, M::Point)],
    times: &[f64],
) -> Result<usize> {
    let mut bad = 0;
    for &t in times {
        for (x, y) in pairs {
            if m.heat_kernel(t, x, y)?.to_bits() != m.heat_kernel(t, y, x)?.to_bits() {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// Smallest kernel value over `pairs` and `times`; NaN counts as `−∞`.
pub fn min_kernel_value<M: Manifold>(
    m: &M,
    pairs: &[(M::Point, M::Point)],
    times: &[f64],
) -> Result<f64> {
    let mut least = f64::INFINITY;
    for &t in times {
        for (x, y) in pairs {
            let v = m.heat_kernel(t, x, y)?;
            least = least.min(if v.is_nan() { f64::NEG_INFINITY } else { v });
        }
    }
    Ok(least)
}

/// Largest change of `p_t(x, y)` under random isometries, relative to the
/// peak value `p_t(x, x)` (tail values sit below series round-off).
pub fn isometry_error<M: Isometries, R: Rng + ?Sized>(
    m: &M,
    pairs: &[(M::Point, M::Point)],
    times: &[f64],
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let g = m.random_isometry(rng);
        for &t in times {
            for (x, y) in pairs {
                let a = m.heat_kernel(t, x, y)?;
                let b = m.heat_kernel(t, &g(x), &g(y))?;
                let peak = m.heat_kernel(t, x, x)?;
                worst = worst.max(nan_to_inf((a - b).abs() / peak));
            }
        }
    }
    Ok(worst)
}

fn nan_to_inf(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

fn random_pairs<M: Manifold, R: Rng + ?Sized>(m: &M, count: usize, rng: &mut R) -> Vec<(M::Point, M::Point)> {
    (0..count)
        .map(|_| (m.sample_uniform(rng), m.sample_uniform(rng)))
        .collect()
}

/// Quadrature resolution used for each manifold's integral checks.
pub fn check_resolution(kind: ManifoldKind) -> usize {
    match kind {
        ManifoldKind::Circle => 512,
        ManifoldKind::Sphere => 96,
        ManifoldKind::Torus => 192,
    }
}

fn manifold_checks<M: Isometries>(
    m: &M,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<CheckOutcome>,
) -> Result<()> {
    let kind = Some(M::KIND);
    let res = check_resolution(M::KIND);
    let centers: Vec<M::Point> = (0..3).map(|_| m.sample_uniform(rng)).collect();
    let mut pairs = random_pairs(m, 3, rng);
    // include a coincident pair
    pairs.push((centers[0], centers[0]));

    out.push(CheckOutcome::new(
        "normalization",
        kind,
        normalization_error(m, &centers, &CHECK_TIMES, res)?,
        NORMALIZATION_TOL,
    ));
    out.push(CheckOutcome::new(
        "semigroup",
        kind,
        semigroup_error(m, &pairs, &CHECK_TIMES, res)?,
        SEMIGROUP_TOL,
    ));
    let sym_pairs = random_pairs(m, 64, rng);
    out.push(CheckOutcome::new(
        "symmetry",
        kind,
        symmetry_violations(m, &sym_pairs, &CHECK_TIMES)? as f64,
        0.0,
    ));
    let least = min_kernel_value(m, &sym_pairs, &CHECK_TIMES)?;
    out.push(CheckOutcome::new(
        "positivity",
        kind,
        if least > 0.0 { 0.0 } else { 1.0 },
        0.0,
    ));
    out.push(CheckOutcome::new(
        "isometry invariance",
        kind,
        isometry_error(m, &pairs, &CHECK_TIMES, 8, rng)?,
        ISOMETRY_TOL,
    ));
    Ok(())
}

/// Symmetry and triangle-inequality violations of `d_q` and `d_∞`, plus
/// the largest breach of `d_{q₁} ≤ d_{q₂}` for `q₁ ≤ q₂`, over random
/// circle path triples.
fn metric_checks(m: &Circle, rng: &mut ChaCha8Rng, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let spec = PriorSpec::new(8, 1.0)?;
    let grid = QuadratureGrid::new(256)?;
    let p = PredictorDensity::uniform();
    let mut triangle: f64 = 0.0;
    let mut symmetry: f64 = 0.0;
    let mut monotone: f64 = 0.0;
    for _ in 0..20 {
        let f = sample_prior_path(&spec, m, rng)?;
        let g = sample_prior_path(&spec, m, rng)?;
        let h = sample_prior_path(&spec, m, rng)?;
        let mut last = 0.0;
        for q in [1.0, 1.5, 2.0, 4.0] {
            let fg = dq_distance(m, &f, &g, q, &p, &grid)?;
            let gf = dq_distance(m, &g, &f, q, &p, &grid)?;
            let gh = dq_distance(m, &g, &h, q, &p, &grid)?;
            let fh = dq_distance(m, &f, &h, q, &p, &grid)?;
            symmetry = symmetry.max((fg - gf).abs());
            triangle = triangle.max(fh - fg - gh);
            monotone = monotone.max(last - fg);
            last = fg;
        }
        let fg = dinf_distance(m, &f, &g, &grid);
        let gh = dinf_distance(m, &g, &h, &grid);
        let fh = dinf_distance(m, &f, &h, &grid);
        symmetry = symmetry.max((fg - dinf_distance(m, &g, &f, &grid)).abs());
        triangle = triangle.max(fh - fg - gh);
        monotone = monotone.max(dq_distance(m, &f, &g, 4.0, &p, &grid)? - fg);
    }
    out.push(CheckOutcome::new("metric symmetry", None, symmetry, METRIC_SLACK));
    out.push(CheckOutcome::new("triangle inequality", None, triangle.max(0.0), METRIC_SLACK));
    out.push(CheckOutcome::new("q-monotonicity", None, monotone.max(0.0), METRIC_SLACK));
    Ok(())
}

/// Runs every kernel and metric check with kernels built from `config`.
pub fn run_kernel_checks(config: &HeatKernelConfig, seed: u64) -> Result<KernelCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::new();
    outcomes.push(CheckOutcome::new(
        "cross-representation",
        Some(ManifoldKind::Circle),
        circle_cross_representation_error(config, &log_spaced(0.01, 5.0, 40), 64),
        CROSS_REP_TOL,
    ));
    let circle = Circle::with_config(*config)?;
    manifold_checks(&circle, &mut rng, &mut outcomes)?;
    manifold_checks(&Sphere::with_config(*config)?, &mut rng, &mut outcomes)?;
    manifold_checks(&Torus::with_config(*config)?, &mut rng, &mut outcomes)?;
    metric_checks(&circle, &mut rng, &mut outcomes)?;
    Ok(KernelCheckReport { outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_spaced_endpoints() {
        let ts = log_spaced(0.01, 5.0, 5);
        assert!((ts[0] - 0.01).abs() < 1e-15);
        assert!((ts[4] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn outcome_with_nan_fails() {
        assert!(!CheckOutcome::new("x", None, f64::NAN, 1.0).passed);
    }
}
