use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use heatreg::baseline::{
    bandwidth_rule, frechet_mean_weighted, frechet_objective, kernel_regress, KernelFit,
};
use heatreg::manifold::{Angle, Circle, Manifold, Sphere, UnitVector3};
use heatreg::posterior::Dataset;

fn data(pairs: &[(f64, f64)]) -> Dataset<Angle> {
    Dataset::from_pairs(pairs.iter().map(|&(t, x)| (t, Angle::new(x)))).unwrap()
}

// responses within a quarter circle, so the Fréchet mean is unique
fn clustered_obs() -> impl Strategy<Value = (f64, Vec<(f64, f64)>)> {
    (0.0..TAU, prop::collection::vec((0.0f64..=1.0, -0.7f64..0.7), 2..15))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kernel_regression_is_rotation_equivariant(
        (center, obs) in clustered_obs(),
        t in 0.0f64..=1.0,
        h in 0.05f64..1.0,
        shift in -10.0f64..10.0,
    ) {
        let m = Circle::new();
        let d = data(&obs.iter().map(|&(t, x)| (t, center + x)).collect::<Vec<_>>());
        let moved = d.map(|a| a.rotated(shift));
        let a = kernel_regress(&m, &d, t, h)?.rotated(shift);
        let b = kernel_regress(&m, &moved, t, h)?;
        prop_assert!(m.distance(&a, &b) <= 1e-10);
    }

    #[test]
    fn weights_are_scale_free(
        (center, obs) in clustered_obs(),
        scale in 1e-3f64..1e3,
    ) {
        let m = Circle::new();
        let points: Vec<Angle> = obs.iter().map(|&(_, x)| Angle::new(center + x)).collect();
        let weights: Vec<f64> = obs.iter().map(|&(w, _)| w + 0.01).collect();
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let a = frechet_mean_weighted(&m, &points, &weights)?;
        let b = frechet_mean_weighted(&m, &points, &scaled)?;
        prop_assert!(m.distance(&a, &b) <= 1e-10);
    }

    #[test]
    fn circle_mean_is_a_local_minimum((center, obs) in clustered_obs()) {
        let m = Circle::new();
        let points: Vec<Angle> = obs.iter().map(|&(_, x)| Angle::new(center + x)).collect();
        let weights: Vec<f64> = obs.iter().map(|&(w, _)| w + 0.01).collect();
        let mean = frechet_mean_weighted(&m, &points, &weights)?;
        let best = frechet_objective(&m, &mean, &points, &weights);
        for eps in [-1e-3, 1e-3] {
            prop_assert!(frechet_objective(&m, &mean.rotated(eps), &points, &weights) >= best);
        }
    }

    #[test]
    fn sphere_mean_is_a_local_minimum(
        pts in prop::collection::vec((0.2f64..0.9, 0.0..TAU, 0.1f64..1.0), 1..10),
    ) {
        let m = Sphere::new();
        let points: Vec<UnitVector3> =
            pts.iter().map(|&(th, ph, _)| UnitVector3::from_spherical(th, ph)).collect();
        let weights: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let mean = frechet_mean_weighted(&m, &points, &weights)?;
        let best = frechet_objective(&m, &mean, &points, &weights);
        let c = m.coords(&mean);
        for axis in 0..3 {
            for eps in [-1e-3, 1e-3] {
                let mut moved = c.clone();
                moved[axis] += eps;
                let norm = moved.iter().map(|v| v * v).sum::<f64>().sqrt();
                let moved: Vec<f64> = moved.iter().map(|v| v / norm).collect();
                let p = m.point_from_coords(&moved)?;
                prop_assert!(frechet_objective(&m, &p, &points, &weights) >= best - 1e-15);
            }
        }
    }

    #[test]
    fn bandwidth_scales_linearly(ts in prop::collection::vec(0.0f64..1.0, 3..30), a in 0.01f64..100.0) {
        prop_assume!(ts.iter().any(|&t| t != ts[0]));
        let h = bandwidth_rule(&ts)?;
        let scaled: Vec<f64> = ts.iter().map(|t| a * t).collect();
        prop_assert!(h > 0.0);
        prop_assert!((bandwidth_rule(&scaled)? - a * h).abs() <= 1e-10 * a * h);
    }
}

#[test]
fn documented_means() {
    let m = Circle::new();
    let two = frechet_mean_weighted(&m, &[Angle::new(0.0), Angle::new(TAU - 0.2)], &[1.0, 1.0]).unwrap();
    assert!(m.distance(&two, &Angle::new(TAU - 0.1)) < 1e-12);
    let three = [Angle::new(0.0), Angle::new(PI / 2.0), Angle::new(PI)];
    let mean = frechet_mean_weighted(&m, &three, &[1.0; 3]).unwrap();
    assert!(m.distance(&mean, &Angle::new(PI / 2.0)) < 1e-10);
    let one = frechet_mean_weighted(&m, &[Angle::new(4.0)], &[2.0]).unwrap();
    assert_eq!(one, Angle::new(4.0));
}

#[test]
fn regression_limits() {
    let m = Circle::new();
    let d = data(&[(0.1, 0.3), (0.4, 0.9), (0.7, 1.2), (0.95, 0.2)]);
    // tiny bandwidth: the observation at that time
    assert!(m.distance(&kernel_regress(&m, &d, 0.4, 1e-6).unwrap(), &Angle::new(0.9)) < 1e-12);
    // huge bandwidth: the unweighted mean
    let flat = frechet_mean_weighted(&m, &d.responses(), &[1.0; 4]).unwrap();
    assert!(m.distance(&kernel_regress(&m, &d, 0.0, 1e6).unwrap(), &flat) < 1e-9);
    // constant responses give that constant everywhere
    let c = data(&[(0.1, 2.0), (0.5, 2.0), (0.8, 2.0)]);
    let fit = KernelFit::with_rule_of_thumb(&c).unwrap();
    for i in 0..=10 {
        assert!(m.distance(&fit.predict(&m, i as f64 / 10.0).unwrap(), &Angle::new(2.0)) < 1e-12);
    }
}

#[test]
fn bandwidth_examples() {
    let h = bandwidth_rule(&[0.0, 1.0]).unwrap();
    assert!((h - 0.7413 * (2.0f64 / 3.0).powf(0.2)).abs() < 1e-6);
    assert!(bandwidth_rule(&[0.3, 0.3, 0.3]).is_err());
    assert!(bandwidth_rule(&[0.3]).is_err());
}
