//! Seeded experiment harness: replicated fits, parameter sweeps and the
//! posterior contraction-rate check.
//!
//! Every cell owns a generator seeded from the base seed and its indices, so
//! results do not depend on how many worker threads execute the cells.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{frechet_mean_weighted, KernelFit};
use crate::error::{Error, Result};
use crate::inference::{anneal_map, fit_cbm, mh_sample, AnnealConfig, FitResult, McmcConfig, CBM_SEGMENTS};
use crate::manifold::{HeatKernelConfig, Manifold};
use crate::metrics::{
    generate_dataset, l1_error, theorem_rate_sidelength, PredictorDensity, QuadratureGrid,
    Reference, ReferenceCurve,
};
use crate::path::{PiecewiseGeodesicPath, PriorSpec};
use crate::posterior::{Dataset, SigmaMode};

/// Estimators compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Discretized-BM MAP on the configured grid.
    Dbm,
    /// Continuous-BM MAP, approximated on the 200-piece grid.
    Cbm,
    /// Nadaraya–Watson kernel regression.
    Ker,
    /// Constant path at the Fréchet mean of all responses.
    Constant,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dbm => "dbm",
            Method::Cbm => "cbm",
            Method::Ker => "ker",
            Method::Constant => "constant",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dbm" => Ok(Method::Dbm),
            "cbm" => Ok(Method::Cbm),
            "ker" => Ok(Method::Ker),
            "constant" => Ok(Method::Constant),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// Everything needed to generate one dataset and fit it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Noise variance used to generate data.
    pub sigma2: f64,
    /// Noise model assumed by the fit. `None` means `Known(sigma2)`.
    pub fit_sigma: Option<SigmaMode>,
    /// Prior scale `c`.
    pub scale: f64,
    /// Pieces of the DBM grid.
    pub segments: usize,
    /// When set, the DBM grid follows the contraction-rate sidelength rule
    /// for the current `n` instead of `segments`.
    pub rate_epsilon: Option<f64>,
    pub anneal: AnnealConfig,
    pub grid: QuadratureGrid,
    pub density: PredictorDensity,
    /// Record wall-clock time in `runtime_ms` (zero otherwise).
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 30,
            sigma2: 0.1,
            fit_sigma: None,
            scale: 0.01,
            segments: 40,
            rate_epsilon: None,
            anneal: AnnealConfig::default(),
            grid: QuadratureGrid::default(),
            density: PredictorDensity::uniform(),
            timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn sigma_mode(&self) -> SigmaMode {
        self.fit_sigma.unwrap_or(SigmaMode::Known(self.sigma2))
    }

    /// Smallest heat-kernel time a fit with `method` evaluates: the noise
    /// time, the prior step time and the final annealing proposal time.
    pub fn smallest_kernel_time(&self, method: Method) -> f64 {
        let noise = match self.sigma_mode() {
            SigmaMode::Known(s2) => s2,
            SigmaMode::MarginalUniform { a, .. } => 1.0 / a,
        };
        let a = &self.anneal;
        let proposal =
            a.proposal_time * a.temperature_floor * a.cooling_factor / a.initial_temperature;
        match method {
            Method::Dbm | Method::Cbm => {
                let k = method_segments(method, self);
                noise.min(self.scale / k as f64).min(proposal)
            }
            Method::Ker | Method::Constant => noise,
        }
    }

    /// Kernel settings whose truncation cap covers
    /// [`smallest_kernel_time`](Self::smallest_kernel_time).
    pub fn kernel_config(&self, method: Method) -> HeatKernelConfig {
        HeatKernelConfig::default().covering_time(self.smallest_kernel_time(method))
    }

    /// Pieces of the DBM grid after applying the sidelength rule, if any.
    pub fn dbm_segments(&self) -> Result<usize> {
        match self.rate_epsilon {
            Some(eps) => Ok(theorem_rate_sidelength(self.n, eps)?.0),
            None => Ok(self.segments),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        self.sigma_mode().validate()?;
        PriorSpec::new(self.dbm_segments()?, self.scale)?;
        self.anneal.validate()
    }
}

/// One row of the experiment CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub run_id: String,
    pub method: Method,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub c: f64,
    pub sigma2: f64,
    pub seed: u64,
    pub l1_error: f64,
    pub runtime_ms: u64,
    /// Sum of distances between consecutive knots of the fitted path.
    pub knot_tv: f64,
}

/// Writes rows with the header
/// `run_id,method,n,K,c,sigma2,seed,l1_error,runtime_ms,knot_tv`.
pub fn write_results_csv<W: Write>(rows: &[ExperimentResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "run_id", "method", "n", "K", "c", "sigma2", "seed", "l1_error", "runtime_ms",
            "knot_tv",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Appends rows to an existing CSV without repeating the header.
pub fn append_results_csv<W: Write>(rows: &[ExperimentResult], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// FNV-1a over the little-endian bytes of `parts`.
pub fn mix_seed(parts: &[u64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for part in parts {
        for byte in part.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}

/// Seed of sweep cell `(value_index, replicate)`.
pub fn cell_seed(base: u64, value_index: usize, replicate: usize) -> u64 {
    mix_seed(&[base, value_index as u64, replicate as u64])
}

/// A fitted curve together with method-specific details.
#[derive(Debug, Clone)]
pub struct Fitted<P> {
    pub path: PiecewiseGeodesicPath<P>,
    pub anneal: Option<FitResult<P>>,
    pub bandwidth: Option<f64>,
}

/// Kernel-regression fits are tabulated on this many pieces.
pub const KER_SEGMENTS: usize = 200;

/// Fits `data` with `method`.
pub fn fit_method<M: Manifold>(
    m: &M,
    data: &Dataset<M::Point>,
    method: Method,
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Fitted<M::Point>> {
    let sigma = cfg.sigma_mode();
    match method {
        Method::Dbm => {
            let spec = PriorSpec::new(cfg.dbm_segments()?, cfg.scale)?;
            let fit = anneal_map(data, &sigma, &spec, &cfg.anneal, m, rng)?;
            Ok(Fitted {
                path: fit.path.clone(),
                anneal: Some(fit),
                bandwidth: None,
            })
        }
        Method::Cbm => {
            let fit = fit_cbm(data, &sigma, cfg.scale, &cfg.anneal, m, rng)?;
            Ok(Fitted {
                path: fit.path.clone(),
                anneal: Some(fit),
                bandwidth: None,
            })
        }
        Method::Ker => {
            let ker = KernelFit::with_rule_of_thumb(data)?;
            Ok(Fitted {
                path: ker.to_path(m, KER_SEGMENTS)?,
                anneal: None,
                bandwidth: Some(ker.bandwidth),
            })
        }
        Method::Constant => {
            let responses = data.responses();
            let mean = frechet_mean_weighted(m, &responses, &vec![1.0; responses.len()])?;
            Ok(Fitted {
                path: PiecewiseGeodesicPath::constant(mean, 1),
                anneal: None,
                bandwidth: None,
            })
        }
    }
}

/// Pieces used by `method` under `cfg`.
pub fn method_segments(method: Method, cfg: &ExperimentConfig) -> usize {
    match method {
        Method::Dbm => cfg.dbm_segments().unwrap_or(cfg.segments),
        Method::Cbm => CBM_SEGMENTS,
        Method::Ker => KER_SEGMENTS,
        Method::Constant => 1,
    }
}

/// Draws a dataset from the manifold's reference curve with the generator
/// seeded by `seed`.
pub fn replicate_dataset<M: ReferenceCurve>(
    m: &M,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Dataset<M::Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_dataset(m, &Reference, cfg.n, cfg.sigma2, &cfg.density, &mut rng)
}

/// Generates a dataset from `seed`, fits it with `method` and scores the
/// fit against the reference curve. The fit uses its own stream derived
/// from `seed`, so all methods see the same data for the same seed.
pub fn run_replicate<M: ReferenceCurve>(
    m: &M,
    method: Method,
    cfg: &ExperimentConfig,
    seed: u64,
    run_id: String,
) -> Result<ExperimentResult> {
    let started = Instant::now();
    let data = replicate_dataset(m, cfg, seed)?;
    let mut fit_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 1]));
    let fitted = fit_method(m, &data, method, cfg, &mut fit_rng)?;
    let l1 = l1_error(m, &fitted.path, &Reference, &cfg.grid)?;
    let runtime_ms = if cfg.timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    if !l1.is_finite() {
        return Err(Error::Numerical(format!("non-finite L1 error in run {run_id}")));
    }
    Ok(ExperimentResult {
        run_id,
        method,
        n: cfg.n,
        k: method_segments(method, cfg),
        c: cfg.scale,
        sigma2: cfg.sigma2,
        seed,
        l1_error: l1,
        runtime_ms,
        knot_tv: fitted.path.knot_total_variation(m),
    })
}

/// Axis varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "c")]
    Scale,
    #[serde(rename = "K")]
    Segments,
    #[serde(rename = "n")]
    SampleSize,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" => Ok(SweepAxis::Scale),
            "K" | "k" => Ok(SweepAxis::Segments),
            "n" => Ok(SweepAxis::SampleSize),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis `{other}`"))),
        }
    }
}

impl SweepAxis {
    /// Copy of `cfg` with this axis set to `value`, validated.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::InvalidConfig(format!("expected a positive integer, got {v}")))
            }
        };
        match self {
            SweepAxis::Scale => out.scale = value,
            SweepAxis::Segments => {
                if out.rate_epsilon.is_some() {
                    return Err(Error::InvalidConfig(
                        "cannot sweep K while the sidelength rule sets it".into(),
                    ));
                }
                out.segments = as_count(value)?
            }
            SweepAxis::SampleSize => out.n = as_count(value)?,
        }
        out.validate()?;
        Ok(out)
    }
}

/// Runs `method` for every `(value, replicate)` cell; rows come back ordered
/// by value index, then replicate, whatever the number of threads.
#[allow(clippy::too_many_arguments)]
pub fn sweep<M: ReferenceCurve>(
    m: &M,
    method: Method,
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    replicates: usize,
    base_seed: u64,
    threads: Option<usize>,
) -> Result<Vec<ExperimentResult>> {
    if values.len() < 2 {
        return Err(Error::InvalidConfig("a sweep needs at least two values".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be positive".into()));
    }
    let configs = values
        .iter()
        .map(|v| axis.apply(base, *v))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|i| (0..replicates).map(move |r| (i, r)))
        .collect();
    let run = || {
        cells
            .par_iter()
            .map(|&(i, r)| {
                let seed = cell_seed(base_seed, i, r);
                run_replicate(m, method, &configs[i], seed, format!("{method}-v{i}-r{r}"))
            })
            .collect::<Result<Vec<_>>>()
    };
    in_pool(threads, run)?
}

/// Runs `job` on a dedicated pool with `threads` workers, or on the global
/// pool when `None`.
pub fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Mean of `l1_error` for each distinct value of `key`, in first-seen order.
pub fn mean_by<K: PartialEq + Copy>(
    rows: &[ExperimentResult],
    key: impl Fn(&ExperimentResult) -> K,
    value: impl Fn(&ExperimentResult) -> f64,
) -> Vec<(K, f64)> {
    let mut groups: Vec<(K, f64, usize)> = Vec::new();
    for row in rows {
        let k = key(row);
        match groups.iter_mut().find(|g| g.0 == k) {
            Some(g) => {
                g.1 += value(row);
                g.2 += 1;
            }
            None => groups.push((k, value(row), 1)),
        }
    }
    groups.into_iter().map(|(k, s, c)| (k, s / c as f64)).collect()
}

/// Settings for the contraction-rate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionConfig {
    pub sigma2: f64,
    /// Prior scale `c`; the rate statement is for standard BM (`c = 1`).
    pub scale: f64,
    pub epsilon: f64,
    pub replicates: usize,
    /// Metropolis sweeps (one sweep = `K + 1` single-knot updates).
    pub sweeps: usize,
    pub burn_in_sweeps: usize,
    pub grid: QuadratureGrid,
    pub density: PredictorDensity,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        ContractionConfig {
            sigma2: 0.1,
            scale: 1.0,
            epsilon: 0.05,
            replicates: 5,
            sweeps: 3000,
            burn_in_sweeps: 1000,
            grid: QuadratureGrid::default(),
            density: PredictorDensity::uniform(),
        }
    }
}

impl ContractionConfig {
    /// Random-walk proposal time matched to the conditional spread of a
    /// knot, roughly `σ² K / n`, with the usual 2.4² scaling.
    pub fn proposal_time(&self, n: usize, segments: usize) -> f64 {
        (2.4f64.powi(2) * self.sigma2 * segments as f64 / n as f64).min(0.5)
    }

    /// Smallest heat-kernel time used when sampling at any of `n_values`.
    pub fn smallest_kernel_time(&self, n_values: &[usize]) -> f64 {
        n_values
            .iter()
            .filter_map(|&n| {
                let k = theorem_rate_sidelength(n, self.epsilon).ok()?.0;
                Some((self.scale / k as f64).min(self.proposal_time(n, k)))
            })
            .fold(self.sigma2, f64::min)
    }

    pub fn mcmc(&self, n: usize, segments: usize) -> McmcConfig {
        let per_sweep = segments + 1;
        McmcConfig {
            iterations: self.sweeps * per_sweep,
            burn_in: self.burn_in_sweeps * per_sweep,
            thinning: per_sweep,
            proposal_time: self.proposal_time(n, segments),
        }
    }
}

/// One `(n, replicate)` cell of the contraction experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub replicate: usize,
    pub seed: u64,
    /// Posterior mean of `d₁(f, f0)` over retained samples.
    pub posterior_mean_d1: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    /// `(n, mean error over replicates)`.
    pub means: Vec<(usize, f64)>,
    /// Least-squares slope of `log mean error` against `log n`.
    pub slope: f64,
}

impl ContractionReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// For each `n`, sets `K` by the contraction-rate sidelength rule, samples
/// the posterior and records the posterior mean `d₁` error; then fits the
/// log–log slope of error against `n`.
pub fn contraction<M: ReferenceCurve>(
    m: &M,
    cfg: &ContractionConfig,
    n_values: &[usize],
    base_seed: u64,
    threads: Option<usize>,
) -> Result<ContractionReport> {
    if n_values.len() < 3 {
        return Err(Error::InvalidConfig(
            "the contraction check needs at least three sample sizes".into(),
        ));
    }
    if cfg.replicates == 0 || cfg.sweeps <= cfg.burn_in_sweeps {
        return Err(Error::InvalidConfig(
            "need positive replicates and more sweeps than burn-in".into(),
        ));
    }
    let cells: Vec<(usize, usize)> = (0..n_values.len())
        .flat_map(|i| (0..cfg.replicates).map(move |r| (i, r)))
        .collect();
    let rows = in_pool(threads, || {
        cells
            .par_iter()
            .map(|&(i, r)| contraction_cell(m, cfg, n_values[i], r, cell_seed(base_seed, i, r)))
            .collect::<Result<Vec<_>>>()
    })??;
    let means: Vec<(usize, f64)> = n_values
        .iter()
        .map(|&n| {
            let errs: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.posterior_mean_d1).collect();
            (n, errs.iter().sum::<f64>() / errs.len() as f64)
        })
        .collect();
    let points: Vec<(f64, f64)> = means.iter().map(|&(n, e)| ((n as f64).ln(), e.ln())).collect();
    Ok(ContractionReport {
        rows,
        slope: ls_slope(&points),
        means,
    })
}

fn contraction_cell<M: ReferenceCurve>(
    m: &M,
    cfg: &ContractionConfig,
    n: usize,
    replicate: usize,
    seed: u64,
) -> Result<ContractionRow> {
    let (k, _) = theorem_rate_sidelength(n, cfg.epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = generate_dataset(m, &Reference, n, cfg.sigma2, &cfg.density, &mut rng)?;
    let spec = PriorSpec::new(k, cfg.scale)?;
    let run = mh_sample(&data, &SigmaMode::Known(cfg.sigma2), &spec, &cfg.mcmc(n, k), m, &mut rng)?;
    let mut total = 0.0;
    for sample in &run.samples {
        total += l1_error(m, sample, &Reference, &cfg.grid)?;
    }
    let error = total / run.samples.len() as f64;
    if !(error.is_finite() && error > 0.0) {
        return Err(Error::Numerical(format!(
            "degenerate posterior error {error} at n = {n}"
        )));
    }
    Ok(ContractionRow {
        n,
        k,
        replicate,
        seed,
        posterior_mean_d1: error,
        acceptance_rate: run.acceptance_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Circle;

    #[test]
    fn seeds_depend_on_every_index() {
        let a = cell_seed(7, 0, 0);
        assert_ne!(a, cell_seed(7, 1, 0));
        assert_ne!(a, cell_seed(7, 0, 1));
        assert_ne!(a, cell_seed(8, 0, 0));
        assert_eq!(a, cell_seed(7, 0, 0));
    }

    #[test]
    fn method_names_roundtrip() {
        for m in [Method::Dbm, Method::Cbm, Method::Ker, Method::Constant] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("spline".parse::<Method>().is_err());
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0]
            .iter()
            .map(|n| (n.ln(), (3.0 * n.powf(-0.3)).ln()))
            .collect();
        assert!((ls_slope(&pts) + 0.3).abs() < 1e-12);
    }

    #[test]
    fn sweep_rejects_single_value() {
        let cfg = ExperimentConfig::default();
        let err = sweep(&Circle::new(), Method::Ker, &cfg, SweepAxis::Scale, &[0.1], 1, 0, Some(1));
        assert!(err.is_err());
    }

    #[test]
    fn csv_header_has_all_columns() {
        let row = ExperimentResult {
            run_id: "x".into(),
            method: Method::Ker,
            n: 30,
            k: 200,
            c: 0.01,
            sigma2: 0.1,
            seed: 1,
            l1_error: 0.2,
            runtime_ms: 0,
            knot_tv: 1.0,
        };
        let mut buf = Vec::new();
        write_results_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("run_id,method,n,K,c,sigma2,seed,l1_error,runtime_ms,knot_tv\n"));
        assert!(text.contains("x,ker,30,200,0.01,0.1,1,0.2,0,1.0"));
    }
}
