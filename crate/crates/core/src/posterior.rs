//! Heat-kernel likelihood and the unnormalized posterior over paths.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::metrics::PredictorDensity;
use crate::path::{log_prior, PiecewiseGeodesicPath, PriorSpec};
use crate::quadrature::gauss_legendre_on;

/// A single `(t, x)` pair with `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<P> {
    pub t: f64,
    pub x: P,
}

/// Regression data with manifold-valued responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<P> {
    observations: Vec<Observation<P>>,
}

impl<P: Copy> Dataset<P> {
    pub fn new(observations: Vec<Observation<P>>) -> Result<Self> {
        if let Some(bad) = observations
            .iter()
            .find(|o| !(0.0..=1.0).contains(&o.t))
        {
            return Err(Error::OutOfDomain(bad.t));
        }
        Ok(Dataset { observations })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, P)>) -> Result<Self> {
        Dataset::new(pairs.into_iter().map(|(t, x)| Observation { t, x }).collect())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation<P>] {
        &self.observations
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation<P>> {
        self.observations.iter()
    }

    pub fn ts(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.t).collect()
    }

    pub fn responses(&self) -> Vec<P> {
        self.observations.iter().map(|o| o.x).collect()
    }

    pub fn concat(&self, other: &Dataset<P>) -> Dataset<P> {
        let mut observations = self.observations.clone();
        observations.extend_from_slice(&other.observations);
        Dataset { observations }
    }

    pub fn map<Q: Copy>(&self, mut f: impl FnMut(&P) -> Q) -> Dataset<Q> {
        Dataset {
            observations: self
                .observations
                .iter()
                .map(|o| Observation { t: o.t, x: f(&o.x) })
                .collect(),
        }
    }

    /// Writes the `t,coord1[,coord2,coord3]` CSV format.
    pub fn write_csv<M: Manifold<Point = P>, W: Write>(&self, m: &M, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=M::KIND.coord_count()).map(|i| format!("coord{i}")));
        w.write_record(&header)?;
        for o in &self.observations {
            let mut row = vec![o.t.to_string()];
            row.extend(m.coords(&o.x).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<M: Manifold<Point = P>, R: Read>(m: &M, reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let expected = M::KIND.coord_count() + 1;
        let header = r.headers()?.clone();
        if header.len() != expected || header.get(0) != Some("t") {
            return Err(Error::InvalidConfig(format!(
                "{} dataset needs {expected} columns `t,coord1..`, found {:?}",
                M::KIND,
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut observations = Vec::new();
        for record in r.records() {
            let record = record?;
            let values = record
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidConfig(format!("bad number `{s}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let x = m.point_from_coords(&values[1..])?;
            observations.push(Observation { t: values[0], x });
        }
        Dataset::new(observations)
    }
}

/// How the noise variance `σ²` enters the likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    /// Fixed, known `σ²`.
    Known(f64),
    /// `σ²` integrated against the uniform density on `[1/A, A]` with a
    /// Gauss–Legendre rule of `nodes` points.
    MarginalUniform { a: f64, nodes: usize },
}

impl SigmaMode {
    pub const DEFAULT_NODES: usize = 16;

    pub fn marginal(a: f64) -> Self {
        SigmaMode::MarginalUniform {
            a,
            nodes: Self::DEFAULT_NODES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SigmaMode::Known(s2) if !(s2 > 0.0 && s2.is_finite()) => Err(Error::InvalidConfig(
                format!("σ² must be positive, got {s2}"),
            )),
            SigmaMode::MarginalUniform { a, .. } if !(a > 1.0 && a.is_finite()) => Err(
                Error::InvalidConfig(format!("marginal bound A must exceed 1, got {a}")),
            ),
            SigmaMode::MarginalUniform { nodes, .. } if nodes < 4 => Err(Error::InvalidConfig(
                format!("marginal quadrature needs at least 4 nodes, got {nodes}"),
            )),
            _ => Ok(()),
        }
    }
}

/// A [`SigmaMode`] with its quadrature rule precomputed.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    times: Vec<f64>,
    log_weights: Vec<f64>,
}

impl NoiseModel {
    pub fn new(sigma: &SigmaMode) -> Result<Self> {
        sigma.validate()?;
        Ok(match *sigma {
            SigmaMode::Known(s2) => NoiseModel {
                times: vec![s2],
                log_weights: vec![0.0],
            },
            SigmaMode::MarginalUniform { a, nodes } => {
                let (lo, hi) = (1.0 / a, a);
                let (times, weights) = gauss_legendre_on(lo, hi, nodes);
                let width = hi - lo;
                NoiseModel {
                    times,
                    log_weights: weights.iter().map(|w| (w / width).ln()).collect(),
                }
            }
        })
    }

    /// Log density of observing `x` when the regression function sits at
    /// `center`.
    pub fn log_density<M: Manifold>(&self, m: &M, center: &M::Point, x: &M::Point) -> Result<f64> {
        if self.times.len() == 1 {
            return m.log_heat_kernel(self.times[0], center, x);
        }
        let mut terms = Vec::with_capacity(self.times.len());
        for (t, lw) in self.times.iter().zip(&self.log_weights) {
            terms.push(lw + m.log_heat_kernel(*t, center, x)?);
        }
        Ok(log_sum_exp(&terms))
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `Σ_i log p_{σ²}(f(t_i), x_i)`; the predictor density factors are
/// dropped since they do not depend on `f`.
pub fn log_likelihood<M: Manifold>(
    f: &PiecewiseGeodesicPath<M::Point>,
    data: &Dataset<M::Point>,
    sigma: &SigmaMode,
    m: &M,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let noise = NoiseModel::new(sigma)?;
    let mut total = 0.0;
    for o in data.iter() {
        let center = f.eval(m, o.t)?;
        total += noise.log_density(m, &center, &o.x)?;
    }
    Ok(total)
}

/// Unnormalized log posterior: `log π_h(f) + log-likelihood`.
pub fn log_posterior<M: Manifold>(
    f: &PiecewiseGeodesicPath<M::Point>,
    data: &Dataset<M::Point>,
    sigma: &SigmaMode,
    spec: &PriorSpec,
    m: &M,
) -> Result<f64> {
    let ll = log_likelihood(f, data, sigma, m)?;
    Ok(log_prior(f, spec, m)? + ll)
}

/// Predictor density at `t` if it reaches the threshold `r`, else zero.
pub fn restricted_weight(t: f64, density: &PredictorDensity, r: f64) -> f64 {
    let p = density.density(t);
    if p >= r {
        p
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Angle, Circle};
    use std::f64::consts::PI;

    fn circle_path(angles: &[f64]) -> PiecewiseGeodesicPath<Angle> {
        PiecewiseGeodesicPath::new(angles.iter().map(|&a| Angle::new(a)).collect()).unwrap()
    }

    #[test]
    fn single_exact_observation() {
        let m = Circle::new();
        let f = circle_path(&[1.0, 1.0]);
        let data = Dataset::from_pairs([(0.4, Angle::new(1.0))]).unwrap();
        let ll = log_likelihood(&f, &data, &SigmaMode::Known(0.5), &m).unwrap();
        assert!((ll - 0.564_189_583_547_756_3_f64.ln()).abs() < 1e-12);
        // p_{1/2}(0,0) = 1/√π up to e^{-4π²}-sized wrapping terms
        assert!((ll + 0.5 * PI.ln()).abs() < 1e-12);
    }

    #[test]
    fn posterior_example_sums_prior_and_likelihood() {
        let m = Circle::new();
        let f = circle_path(&[0.0, 0.0, 0.0]);
        let data = Dataset::from_pairs([(0.3, Angle::new(0.0))]).unwrap();
        let spec = PriorSpec::new(2, 1.0).unwrap();
        let lp = log_posterior(&f, &data, &SigmaMode::Known(0.5), &spec, &m).unwrap();
        let oracle = -1.5 * PI.ln() - (2.0 * PI).ln();
        assert!((lp - oracle).abs() < 1e-12);
        assert!((lp - (-3.5550)).abs() < 1e-4);
        let ll = log_likelihood(&f, &data, &SigmaMode::Known(0.5), &m).unwrap();
        let prior = log_prior(&f, &spec, &m).unwrap();
        assert!((lp - ll - prior).abs() < 1e-15);
    }

    #[test]
    fn empty_data_is_rejected() {
        let m = Circle::new();
        let f = circle_path(&[0.0, 0.0]);
        let data: Dataset<Angle> = Dataset::new(vec![]).unwrap();
        let spec = PriorSpec::new(1, 1.0).unwrap();
        assert!(matches!(
            log_posterior(&f, &data, &SigmaMode::Known(0.5), &spec, &m),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn likelihood_is_additive() {
        let m = Circle::new();
        let f = circle_path(&[0.2, 1.5, 3.0]);
        let a = Dataset::from_pairs([(0.1, Angle::new(0.3)), (0.9, Angle::new(2.0))]).unwrap();
        let b = Dataset::from_pairs([(0.5, Angle::new(5.0))]).unwrap();
        let s = SigmaMode::Known(0.2);
        let joint = log_likelihood(&f, &a.concat(&b), &s, &m).unwrap();
        let split = log_likelihood(&f, &a, &s, &m).unwrap() + log_likelihood(&f, &b, &s, &m).unwrap();
        assert!((joint - split).abs() < 1e-12);
    }

    #[test]
    fn narrow_marginal_matches_known_unit_variance() {
        let m = Circle::new();
        let f = circle_path(&[0.0, 1.0]);
        let data = Dataset::from_pairs([(0.5, Angle::new(1.2)), (0.1, Angle::new(PI))]).unwrap();
        let known = log_likelihood(&f, &data, &SigmaMode::Known(1.0), &m).unwrap();
        let marginal = log_likelihood(&f, &data, &SigmaMode::marginal(1.0001), &m).unwrap();
        assert!((known - marginal).abs() < 1e-3);
    }

    #[test]
    fn invalid_sigma_modes() {
        assert!(SigmaMode::Known(0.0).validate().is_err());
        assert!(SigmaMode::marginal(1.0).validate().is_err());
        assert!(SigmaMode::MarginalUniform { a: 2.0, nodes: 3 }.validate().is_err());
    }

    #[test]
    fn restricted_weight_examples() {
        let uniform = PredictorDensity::uniform();
        assert_eq!(restricted_weight(0.3, &uniform, 0.0), 1.0);
        assert_eq!(restricted_weight(0.3, &uniform, 2.0), 0.0);
        let ramp = PredictorDensity::tabulated(vec![(0.0, 0.0), (1.0, 2.0)]).unwrap();
        assert_eq!(restricted_weight(0.25, &ramp, 1.0), 0.0);
        assert!((restricted_weight(0.75, &ramp, 1.0) - 1.5).abs() < 1e-15);
        assert!((restricted_weight(0.5, &ramp, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let m = Circle::new();
        let data = Dataset::from_pairs([(0.125, Angle::new(0.1)), (0.9, Angle::new(6.0))]).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,coord1\n"));
        let back = Dataset::read_csv(&m, buf.as_slice()).unwrap();
        for (a, b) in data.iter().zip(back.iter()) {
            assert!((a.t - b.t).abs() < 1e-12);
            assert!((a.x.radians() - b.x.radians()).abs() < 1e-12);
        }
    }
}
