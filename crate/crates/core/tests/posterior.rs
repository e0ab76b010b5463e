use std::f64::consts::TAU;

use proptest::prelude::*;

use heatreg::manifold::{Angle, Circle, Manifold};
use heatreg::metrics::PredictorDensity;
use heatreg::path::{PiecewiseGeodesicPath, PriorSpec};
use heatreg::posterior::{
    log_likelihood, log_posterior, restricted_weight, Dataset, NoiseModel, SigmaMode,
};

fn dataset(pairs: &[(f64, f64)]) -> Dataset<Angle> {
    Dataset::from_pairs(pairs.iter().map(|&(t, x)| (t, Angle::new(x)))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn posterior_is_rotation_invariant(
        knots in prop::collection::vec(0.0..TAU, 2..8),
        obs in prop::collection::vec((0.0f64..=1.0, 0.0..TAU), 1..20),
        shift in -10.0f64..10.0,
        sigma2 in 0.02f64..2.0,
        c in 0.05f64..3.0,
    ) {
        let m = Circle::new();
        let spec = PriorSpec::new(knots.len() - 1, c)?;
        let sigma = SigmaMode::Known(sigma2);
        let f = PiecewiseGeodesicPath::new(knots.iter().map(|&a| Angle::new(a)).collect())?;
        let data = dataset(&obs);
        let g = f.map(|a| a.rotated(shift));
        let moved = data.map(|a| a.rotated(shift));
        let a = log_posterior(&f, &data, &sigma, &spec, &m)?;
        let b = log_posterior(&g, &moved, &sigma, &spec, &m)?;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn marginal_density_lies_between_its_nodes(
        center in 0.0..TAU, x in 0.0..TAU, a in 1.1f64..10.0,
    ) {
        let m = Circle::new();
        let (c, x) = (Angle::new(center), Angle::new(x));
        let marginal = NoiseModel::new(&SigmaMode::marginal(a))?.log_density(&m, &c, &x)?;
        // the Gauss–Legendre nodes all lie inside [1/A, A]; sample that range finely
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=2000 {
            let s = 1.0 / a + (a - 1.0 / a) * i as f64 / 2000.0;
            let v = m.log_heat_kernel(s, &c, &x)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        prop_assert!(marginal >= lo - 1e-12 && marginal <= hi + 1e-12, "{lo} <= {marginal} <= {hi}");
    }

    #[test]
    fn likelihood_sums_over_observations(
        obs in prop::collection::vec((0.0f64..=1.0, 0.0..TAU), 2..10),
        knot in 0.0..TAU,
    ) {
        let m = Circle::new();
        let f = PiecewiseGeodesicPath::constant(Angle::new(knot), 3);
        let sigma = SigmaMode::Known(0.3);
        let whole = log_likelihood(&f, &dataset(&obs), &sigma, &m)?;
        let parts: f64 = obs
            .iter()
            .map(|&o| log_likelihood(&f, &dataset(&[o]), &sigma, &m).unwrap())
            .sum();
        prop_assert!((whole - parts).abs() <= 1e-10 * whole.abs().max(1.0));
    }
}

#[test]
fn constant_data_is_fit_best_by_its_own_constant() {
    let m = Circle::new();
    let x0 = 2.2;
    let data = dataset(&[(0.1, x0), (0.4, x0), (0.5, x0), (0.9, x0)]);
    let sigma = SigmaMode::Known(0.2);
    let at = |a: f64| {
        log_likelihood(&PiecewiseGeodesicPath::constant(Angle::new(a), 4), &data, &sigma, &m)
            .unwrap()
    };
    let best = at(x0);
    for i in 0..3600 {
        let a = i as f64 * TAU / 3600.0;
        assert!(at(a) <= best + 1e-12, "constant {a} beats x0");
    }
}

#[test]
fn single_observation_on_the_path() {
    let m = Circle::new();
    let f = PiecewiseGeodesicPath::constant(Angle::new(1.0), 2);
    let ll = log_likelihood(&f, &dataset(&[(0.3, 1.0)]), &SigmaMode::Known(0.5), &m).unwrap();
    // p_{1/2}(x, x) = 1/√π
    assert!((ll + 0.5 * std::f64::consts::PI.ln()).abs() < 1e-9);
}

#[test]
fn restricted_support_weighting() {
    let uniform = PredictorDensity::uniform();
    let linear = PredictorDensity::tabulated(vec![(0.0, 0.0), (1.0, 2.0)]).unwrap();
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        assert_eq!(restricted_weight(t, &uniform, 0.0), 1.0);
        assert_eq!(restricted_weight(t, &uniform, 2.0), 0.0);
        let w = restricted_weight(t, &linear, 1.0);
        if t < 0.5 {
            assert_eq!(w, 0.0);
        } else {
            assert!((w - 2.0 * t).abs() < 1e-12);
        }
    }
}

#[test]
fn invalid_noise_settings() {
    assert!(NoiseModel::new(&SigmaMode::Known(0.0)).is_err());
    assert!(NoiseModel::new(&SigmaMode::marginal(1.0)).is_err());
    assert!(NoiseModel::new(&SigmaMode::MarginalUniform { a: 2.0, nodes: 3 }).is_err());
}
