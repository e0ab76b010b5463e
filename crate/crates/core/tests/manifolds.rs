use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use heatreg::checks::{normalization_error, semigroup_error, CHECK_TIMES};
use heatreg::manifold::{
    circle_eigen_sum, circle_wrapped_sum, Angle, Circle, HeatKernelConfig, HeatStep, Manifold,
    Sphere, Torus, TorusPoint, UnitVector3,
};

fn angle() -> impl Strategy<Value = Angle> {
    (0.0..TAU).prop_map(Angle::new)
}

fn unit_vector() -> impl Strategy<Value = UnitVector3> {
    (-1.0f64..1.0, 0.0..TAU).prop_map(|(z, phi)| UnitVector3::from_spherical(z.acos(), phi))
}

fn torus_point() -> impl Strategy<Value = TorusPoint> {
    (0.0..TAU, 0.0..TAU).prop_map(|(a, b)| TorusPoint::new(a, b))
}

fn check_time() -> impl Strategy<Value = f64> {
    prop::sample::select(CHECK_TIMES.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn circle_representations_agree(t in 0.01f64..5.0, delta in -PI..PI) {
        let cfg = HeatKernelConfig::default();
        let diff = (circle_wrapped_sum(t, delta, &cfg) - circle_eigen_sum(t, delta, &cfg)).abs();
        prop_assert!(diff <= 1e-10, "t={t} delta={delta} diff={diff}");
    }

    #[test]
    fn kernels_are_exactly_symmetric(
        t in 0.01f64..5.0, a in angle(), b in angle(),
        u in unit_vector(), v in unit_vector(),
        p in torus_point(), q in torus_point(),
    ) {
        prop_assert_eq!(Circle::new().heat_kernel(t, &a, &b)?.to_bits(), Circle::new().heat_kernel(t, &b, &a)?.to_bits());
        prop_assert_eq!(Sphere::new().heat_kernel(t, &u, &v)?.to_bits(), Sphere::new().heat_kernel(t, &v, &u)?.to_bits());
        prop_assert_eq!(Torus::new().heat_kernel(t, &p, &q)?.to_bits(), Torus::new().heat_kernel(t, &q, &p)?.to_bits());
    }

    #[test]
    fn kernels_are_positive(
        t in 0.01f64..5.0, a in angle(), b in angle(),
        u in unit_vector(), v in unit_vector(),
        p in torus_point(), q in torus_point(),
    ) {
        prop_assert!(Circle::new().heat_kernel(t, &a, &b)? > 0.0);
        prop_assert!(Sphere::new().heat_kernel(t, &u, &v)? > 0.0);
        prop_assert!(Torus::new().heat_kernel(t, &p, &q)? > 0.0);
        prop_assert!(Circle::new().log_heat_kernel(t, &a, &b)?.is_finite());
    }

    #[test]
    fn circle_kernel_is_rotation_invariant(t in 0.01f64..5.0, a in angle(), b in angle(), shift in -10.0f64..10.0) {
        let m = Circle::new();
        let base = m.heat_kernel(t, &a, &b)?;
        let moved = m.heat_kernel(t, &a.rotated(shift), &b.rotated(shift))?;
        let peak = m.heat_kernel(t, &a, &a)?;
        prop_assert!((base - moved).abs() <= 1e-13 * peak, "{base} vs {moved}");
    }

    #[test]
    fn distances_are_metrics(a in angle(), b in angle(), c in angle(),
                             u in unit_vector(), v in unit_vector(), w in unit_vector(),
                             p in torus_point(), q in torus_point(), r in torus_point()) {
        fn axioms<M: Manifold>(m: &M, x: &M::Point, y: &M::Point, z: &M::Point) -> Result<(), TestCaseError> {
            let d = m.distance(x, y);
            prop_assert!(d >= 0.0 && d <= m.diameter() + 1e-12);
            prop_assert_eq!(d, m.distance(y, x));
            prop_assert!(m.distance(x, z) <= d + m.distance(y, z) + 1e-12);
            prop_assert!(m.distance(x, x) <= 1e-15);
            Ok(())
        }
        axioms(&Circle::new(), &a, &b, &c)?;
        axioms(&Sphere::new(), &u, &v, &w)?;
        axioms(&Torus::new(), &p, &q, &r)?;
    }

    #[test]
    fn interpolation_runs_at_constant_speed(a in angle(), b in angle(), u in unit_vector(), v in unit_vector(),
                                            p in torus_point(), q in torus_point(), s in 0.0f64..1.0) {
        fn speed<M: Manifold>(m: &M, x: &M::Point, y: &M::Point, s: f64) -> Result<(), TestCaseError> {
            if m.is_antipodal(x, y) {
                return Ok(());
            }
            let g = m.interpolate(x, y, s);
            let d = m.distance(x, y);
            prop_assert!((m.distance(x, &g) - s * d).abs() <= 1e-12);
            prop_assert!((m.distance(&g, y) - (1.0 - s) * d).abs() <= 1e-12);
            prop_assert!(m.points_equal(&m.interpolate(x, y, 0.0), x));
            prop_assert!(m.points_equal(&m.interpolate(x, y, 1.0), y));
            Ok(())
        }
        speed(&Circle::new(), &a, &b, s)?;
        speed(&Sphere::new(), &u, &v, s)?;
        speed(&Torus::new(), &p, &q, s)?;
    }

    #[test]
    fn exp_inverts_log(a in angle(), b in angle(), u in unit_vector(), v in unit_vector(),
                       p in torus_point(), q in torus_point()) {
        fn roundtrip<M: Manifold>(m: &M, x: &M::Point, y: &M::Point) -> Result<(), TestCaseError> {
            if m.is_antipodal(x, y) {
                return Ok(());
            }
            let back = m.exp_map(x, &m.log_map(x, y));
            prop_assert!(m.distance(&back, y) <= 1e-12);
            Ok(())
        }
        roundtrip(&Circle::new(), &a, &b)?;
        roundtrip(&Sphere::new(), &u, &v)?;
        roundtrip(&Torus::new(), &p, &q)?;
    }

    #[test]
    fn coordinates_roundtrip(a in angle(), u in unit_vector(), p in torus_point()) {
        let (c, s, t) = (Circle::new(), Sphere::new(), Torus::new());
        prop_assert!(c.points_equal(&c.point_from_coords(&c.coords(&a))?, &a));
        prop_assert!(s.points_equal(&s.point_from_coords(&s.coords(&u))?, &u));
        prop_assert!(t.points_equal(&t.point_from_coords(&t.coords(&p))?, &p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernels_integrate_to_one(t in check_time(), a in angle(), u in unit_vector(), p in torus_point()) {
        prop_assert!(normalization_error(&Circle::new(), &[a], &[t], 1024)? <= 1e-8);
        prop_assert!(normalization_error(&Sphere::new(), &[u], &[t], 96)? <= 1e-8);
        prop_assert!(normalization_error(&Torus::new(), &[p], &[t], 192)? <= 1e-8);
    }

    #[test]
    fn semigroup_identity_holds(t in check_time(), a in angle(), b in angle(), u in unit_vector(),
                                v in unit_vector(), p in torus_point(), q in torus_point()) {
        prop_assert!(semigroup_error(&Circle::new(), &[(a, b)], &[t], 1024)? <= 1e-6);
        prop_assert!(semigroup_error(&Sphere::new(), &[(u, v)], &[t], 96)? <= 1e-6);
        prop_assert!(semigroup_error(&Torus::new(), &[(p, q)], &[t], 192)? <= 1e-6);
    }
}

#[test]
fn invalid_times_are_rejected() {
    let m = Circle::new();
    let x = Angle::new(0.0);
    for t in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(m.heat_kernel(t, &x, &x).is_err());
        assert!(Sphere::new().step_sampler(t).is_err());
    }
}

#[test]
fn sphere_sampler_first_moment() {
    // E[cos θ] = e^{-t}: the l = 1 eigenvalue of Δ/2 is 1
    let m = Sphere::new();
    let t = 0.2;
    let step = m.step_sampler(t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = UnitVector3::from_spherical(1.1, 0.4);
    let n = 50_000;
    let mean: f64 = (0..n).map(|_| step.step(&x, &mut rng).dot(&x)).sum::<f64>() / n as f64;
    let target = (-t).exp();
    // Var[cos θ] ≤ 1 - target² bounds σ
    let sd = ((1.0 - target * target) / n as f64).sqrt();
    assert!((mean - target).abs() < 4.0 * sd, "{mean} vs {target}");
}

#[test]
fn torus_sampler_moves_each_factor_independently() {
    let m = Torus::new();
    let t = 0.3;
    let step = m.step_sampler(t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let origin = TorusPoint::new(0.0, 0.0);
    let n = 50_000;
    let (mut c1, mut c2, mut cc) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let p = step.step(&origin, &mut rng);
        let (a, b) = (p.0.radians().cos(), p.1.radians().cos());
        c1 += a;
        c2 += b;
        cc += a * b;
    }
    let rho = (-t / 2.0f64).exp();
    let sd = (1.0 / n as f64).sqrt();
    assert!((c1 / n as f64 - rho).abs() < 4.0 * sd);
    assert!((c2 / n as f64 - rho).abs() < 4.0 * sd);
    // independence: E[cos a cos b] = ρ²
    assert!((cc / n as f64 - rho * rho).abs() < 4.0 * sd);
}

#[test]
fn tiny_time_samples_stay_close() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = UnitVector3::from_spherical(0.7, 2.0);
    let s = Sphere::new();
    let step = s.step_sampler(1e-6).unwrap();
    for _ in 0..1000 {
        assert!(s.distance(&step.step(&u, &mut rng), &u) < 0.01);
    }
}
