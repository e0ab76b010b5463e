//! MAP estimation by simulated annealing and posterior sampling by a
//! single-knot Metropolis chain.
//!
//! Both move one knot at a time: a uniformly chosen knot is replaced by a
//! heat-kernel step from its current value. The heat kernel is symmetric,
//! so the plain Metropolis ratio is the correct acceptance rule.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::manifold::{HeatStep, Manifold};
use crate::path::{sample_prior_path, PiecewiseGeodesicPath, PriorSpec};
use crate::posterior::{Dataset, NoiseModel, SigmaMode};

/// Half-width of the time window used by [`init_state`].
pub const INIT_WINDOW: f64 = 0.05;
/// Heat-kernel time of the kernel-density score used by [`init_state`].
pub const INIT_KERNEL_TIME: f64 = 0.05;
/// Number of pieces used to approximate continuous-BM paths.
pub const CBM_SEGMENTS: usize = 200;

/// Geometric cooling schedule for [`anneal_map`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub initial_temperature: f64,
    pub cooling_factor: f64,
    pub steps_per_temperature: usize,
    pub temperature_floor: f64,
    /// Proposal step time at the initial temperature; scaled by `T/T₀`.
    pub proposal_time: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            initial_temperature: 1.0,
            cooling_factor: 0.95,
            steps_per_temperature: 200,
            temperature_floor: 1e-3,
            proposal_time: 0.05,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return bad("initial temperature must be positive");
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return bad("cooling factor must lie in (0, 1)");
        }
        if !(self.temperature_floor > 0.0 && self.temperature_floor <= self.initial_temperature) {
            return bad("temperature floor must lie in (0, initial temperature]");
        }
        if !(self.proposal_time > 0.0 && self.proposal_time.is_finite()) {
            return bad("proposal time must be positive");
        }
        Ok(())
    }

    /// Number of temperature levels visited.
    pub fn levels(&self) -> usize {
        let mut t = self.initial_temperature;
        let mut n = 0;
        while t > self.temperature_floor {
            n += 1;
            t *= self.cooling_factor;
        }
        n
    }
}

/// Settings for [`mh_sample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub proposal_time: f64,
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.thinning == 0 {
            return Err(Error::InvalidConfig(
                "iterations and thinning must be positive".into(),
            ));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig("burn-in must be below iterations".into()));
        }
        if !(self.proposal_time > 0.0 && self.proposal_time.is_finite()) {
            return Err(Error::InvalidConfig("proposal time must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of an annealing run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<P> {
    /// Best path visited.
    pub path: PiecewiseGeodesicPath<P>,
    pub best_log_posterior: f64,
    /// `(iteration, current log posterior)` after every step, starting at
    /// iteration 0 with the initial state.
    pub trace: Vec<(usize, f64)>,
    pub acceptance_rate: f64,
}

impl<P: Copy + Serialize> FitResult<P> {
    pub const TRACE_POINTS: usize = 200;

    /// `{path, best_log_posterior, acceptance_rate, trace_subsampled}` with
    /// the trace thinned to at most 200 points plus the final one.
    pub fn to_json<M: Manifold<Point = P>>(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_value::<M>()?)?)
    }

    /// The document written by [`FitResult::to_json`].
    pub fn to_json_value<M: Manifold<Point = P>>(&self) -> Result<serde_json::Value> {
        let stride = self.trace.len().div_ceil(Self::TRACE_POINTS).max(1);
        let mut sub: Vec<(usize, f64)> = self.trace.iter().step_by(stride).copied().collect();
        if let Some(last) = self.trace.last() {
            if sub.last() != Some(last) {
                sub.push(*last);
            }
        }
        let doc = json!({
            "path": self.path.to_json_value::<M>()?,
            "best_log_posterior": self.best_log_posterior,
            "acceptance_rate": self.acceptance_rate,
            "trace_subsampled": sub,
        });
        Ok(doc)
    }
}

/// Post-burn-in, thinned states of a Metropolis chain.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcRun<P> {
    pub samples: Vec<PiecewiseGeodesicPath<P>>,
    pub acceptance_rate: f64,
}

/// Window-mode starting path with `segments` pieces.
///
/// Knot `k` is the observed response, among those with `|t_i − k/K| ≤ 0.05`,
/// that maximizes the kernel-density score `Σ_l p_{0.05}(x_j, x_l)` over the
/// same window. Knots with empty windows copy the nearest filled knot, ties
/// going to the smaller index; if every window is empty, each knot takes the
/// response observed nearest to it in time.
pub fn init_state<M: Manifold>(
    data: &Dataset<M::Point>,
    segments: usize,
    m: &M,
) -> Result<PiecewiseGeodesicPath<M::Point>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if segments == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let mut modes: Vec<Option<M::Point>> = Vec::with_capacity(segments + 1);
    for k in 0..=segments {
        let tk = k as f64 / segments as f64;
        let window: Vec<M::Point> = data
            .iter()
            .filter(|o| (o.t - tk).abs() <= INIT_WINDOW + 1e-12)
            .map(|o| o.x)
            .collect();
        modes.push(window_mode(m, &window)?);
    }
    let filled: Vec<usize> = (0..=segments).filter(|&k| modes[k].is_some()).collect();
    if filled.is_empty() {
        // no knot has data within its window: use the observation nearest in time
        let knots = (0..=segments)
            .map(|k| {
                let tk = k as f64 / segments as f64;
                data.iter()
                    .min_by(|a, b| (a.t - tk).abs().total_cmp(&(b.t - tk).abs()))
                    .expect("nonempty data")
                    .x
            })
            .collect();
        return PiecewiseGeodesicPath::new(knots);
    }
    let knots = (0..=segments)
        .map(|k| {
            modes[k].unwrap_or_else(|| {
                // `filled` is sorted, so min_by_key keeps the smaller index on ties
                let nearest = *filled
                    .iter()
                    .min_by_key(|&&j| j.abs_diff(k))
                    .expect("nonempty data fills at least one window");
                modes[nearest].expect("filled window")
            })
        })
        .collect();
    PiecewiseGeodesicPath::new(knots)
}

fn window_mode<M: Manifold>(m: &M, points: &[M::Point]) -> Result<Option<M::Point>> {
    let mut best: Option<(f64, M::Point)> = None;
    for x in points {
        let mut score = 0.0;
        for y in points {
            score += m.heat_kernel(INIT_KERNEL_TIME, x, y)?;
        }
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, *x));
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Log posterior of a path kept alongside the bookkeeping needed to
/// re-evaluate only the terms touched by a single-knot change.
struct PosteriorState<'a, M: Manifold> {
    m: &'a M,
    noise: NoiseModel,
    step_time: f64,
    path: PiecewiseGeodesicPath<M::Point>,
    /// Observations strictly inside piece `j`: (fraction along piece, response).
    inside: Vec<Vec<(f64, M::Point)>>,
    /// Observations sitting exactly on knot `k`.
    on_knot: Vec<Vec<M::Point>>,
}

impl<'a, M: Manifold> PosteriorState<'a, M> {
    fn new(
        m: &'a M,
        data: Option<&Dataset<M::Point>>,
        sigma: &SigmaMode,
        spec: &PriorSpec,
        path: PiecewiseGeodesicPath<M::Point>,
    ) -> Result<Self> {
        if path.segments() != spec.segments() {
            return Err(Error::SidelengthMismatch {
                expected: spec.segments(),
                found: path.segments(),
            });
        }
        let k = path.segments();
        let mut inside = vec![Vec::new(); k];
        let mut on_knot = vec![Vec::new(); k + 1];
        if let Some(data) = data {
            if data.is_empty() {
                return Err(Error::EmptyDataset);
            }
            for o in data.iter() {
                match path.locate(o.t) {
                    (j, None) => on_knot[j].push(o.x),
                    (j, Some(s)) => inside[j].push((s, o.x)),
                }
            }
        }
        Ok(PosteriorState {
            m,
            noise: NoiseModel::new(sigma)?,
            step_time: spec.step_time(),
            path,
            inside,
            on_knot,
        })
    }

    fn piece_likelihood(&self, j: usize) -> Result<f64> {
        let a = self.path.knot(j);
        let b = self.path.knot(j + 1);
        let mut total = 0.0;
        for (s, x) in &self.inside[j] {
            let center = self.m.interpolate(&a, &b, *s);
            total += self.noise.log_density(self.m, &center, x)?;
        }
        Ok(total)
    }

    fn transition(&self, j: usize) -> Result<f64> {
        self.m
            .log_heat_kernel(self.step_time, &self.path.knot(j), &self.path.knot(j + 1))
    }

    /// Sum of every term that depends on knot `k`.
    fn local(&self, k: usize) -> Result<f64> {
        let last = self.path.segments();
        let mut total = 0.0;
        let center = self.path.knot(k);
        for x in &self.on_knot[k] {
            total += self.noise.log_density(self.m, &center, x)?;
        }
        if k > 0 {
            total += self.transition(k - 1)? + self.piece_likelihood(k - 1)?;
        }
        if k < last {
            total += self.transition(k)? + self.piece_likelihood(k)?;
        }
        Ok(total)
    }

    fn total(&self) -> Result<f64> {
        let mut total = -self.m.volume().ln();
        for j in 0..self.path.segments() {
            total += self.transition(j)? + self.piece_likelihood(j)?;
        }
        for k in 0..=self.path.segments() {
            let center = self.path.knot(k);
            for x in &self.on_knot[k] {
                total += self.noise.log_density(self.m, &center, x)?;
            }
        }
        Ok(total)
    }

    /// Proposes `value` for knot `k`; returns the log-posterior change and
    /// leaves the proposal in place.
    fn try_move(&mut self, k: usize, value: M::Point) -> Result<f64> {
        let before = self.local(k)?;
        self.path.set_knot(k, value);
        let after = self.local(k)?;
        Ok(after - before)
    }
}

/// Simulated-annealing MAP estimate under the discretized BM prior.
pub fn anneal_map<M: Manifold, R: Rng + ?Sized>(
    data: &Dataset<M::Point>,
    sigma: &SigmaMode,
    spec: &PriorSpec,
    cfg: &AnnealConfig,
    m: &M,
    rng: &mut R,
) -> Result<FitResult<M::Point>> {
    cfg.validate()?;
    let start = init_state(data, spec.segments(), m)?;
    let mut state = PosteriorState::new(m, Some(data), sigma, spec, start)?;
    let mut current = state.total()?;
    let mut best = current;
    let mut best_path = state.path.clone();
    let mut trace = vec![(0, current)];
    let (mut proposed, mut accepted) = (0usize, 0usize);
    let knots = spec.segments() + 1;

    let mut temperature = cfg.initial_temperature;
    while temperature > cfg.temperature_floor {
        let stepper =
            m.step_sampler(cfg.proposal_time * temperature / cfg.initial_temperature)?;
        for _ in 0..cfg.steps_per_temperature {
            proposed += 1;
            let k = rng.random_range(0..knots);
            let old = state.path.knot(k);
            let candidate = stepper.step(&old, rng);
            let delta = state.try_move(k, candidate)?;
            if delta >= 0.0 || rng.random::<f64>() < (delta / temperature).exp() {
                accepted += 1;
                current += delta;
                if current > best {
                    best = current;
                    best_path = state.path.clone();
                }
            } else {
                state.path.set_knot(k, old);
            }
            trace.push((proposed, current));
        }
        temperature *= cfg.cooling_factor;
    }

    Ok(FitResult {
        path: best_path,
        best_log_posterior: best,
        trace,
        acceptance_rate: if proposed == 0 {
            0.0
        } else {
            accepted as f64 / proposed as f64
        },
    })
}

/// Continuous-BM MAP estimate, approximated on a fixed 200-piece grid.
pub fn fit_cbm<M: Manifold, R: Rng + ?Sized>(
    data: &Dataset<M::Point>,
    sigma: &SigmaMode,
    scale: f64,
    cfg: &AnnealConfig,
    m: &M,
    rng: &mut R,
) -> Result<FitResult<M::Point>> {
    let spec = PriorSpec::new(CBM_SEGMENTS, scale)?;
    anneal_map(data, sigma, &spec, cfg, m, rng)
}

/// Metropolis sampling of the posterior, started from [`init_state`].
pub fn mh_sample<M: Manifold, R: Rng + ?Sized>(
    data: &Dataset<M::Point>,
    sigma: &SigmaMode,
    spec: &PriorSpec,
    cfg: &McmcConfig,
    m: &M,
    rng: &mut R,
) -> Result<McmcRun<M::Point>> {
    cfg.validate()?;
    let start = init_state(data, spec.segments(), m)?;
    let state = PosteriorState::new(m, Some(data), sigma, spec, start)?;
    run_chain(state, cfg, rng)
}

/// Metropolis sampling of the prior alone (no likelihood), started from a
/// prior draw. Used to check the chain against forward sampling.
pub fn mh_sample_prior<M: Manifold, R: Rng + ?Sized>(
    spec: &PriorSpec,
    cfg: &McmcConfig,
    m: &M,
    rng: &mut R,
) -> Result<McmcRun<M::Point>> {
    cfg.validate()?;
    let start = sample_prior_path(spec, m, rng)?;
    // the noise model is unused without data
    let state = PosteriorState::new(m, None, &SigmaMode::Known(1.0), spec, start)?;
    run_chain(state, cfg, rng)
}

fn run_chain<M: Manifold, R: Rng + ?Sized>(
    mut state: PosteriorState<'_, M>,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<McmcRun<M::Point>> {
    let stepper = state.m.step_sampler(cfg.proposal_time)?;
    let knots = state.path.segments() + 1;
    let mut samples = Vec::with_capacity((cfg.iterations - cfg.burn_in) / cfg.thinning + 1);
    let mut accepted = 0usize;
    for i in 1..=cfg.iterations {
        let k = rng.random_range(0..knots);
        let old = state.path.knot(k);
        let candidate = stepper.step(&old, rng);
        let delta = state.try_move(k, candidate)?;
        if delta >= 0.0 || rng.random::<f64>() < delta.exp() {
            accepted += 1;
        } else {
            state.path.set_knot(k, old);
        }
        if i > cfg.burn_in && (i - cfg.burn_in).is_multiple_of(cfg.thinning) {
            samples.push(state.path.clone());
        }
    }
    Ok(McmcRun {
        samples,
        acceptance_rate: accepted as f64 / cfg.iterations as f64,
    })
}
