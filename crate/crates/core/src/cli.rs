//! Command-line front end: `generate | fit | sweep | contract | check-kernels`.
//!
//! [`run`] parses arguments, executes one command and returns the process
//! exit code, so the binary is a one-liner and tests can drive it in-process.
//! Flags override values from a `--config` JSON file, which override the
//! built-in defaults.

use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use crate::checks::run_kernel_checks;
use crate::error::Error;
use crate::experiment::{
    append_results_csv, contraction, fit_method, mix_seed, replicate_dataset, sweep,
    write_results_csv, ContractionConfig, ExperimentConfig, ExperimentResult, Method, SweepAxis,
    method_segments,
};
use crate::inference::AnnealConfig;
use crate::manifold::{Circle, HeatKernelConfig, ManifoldKind, Sphere, Torus};
use crate::metrics::{l1_error, Reference, ReferenceCurve};
use crate::posterior::{Dataset, SigmaMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "heatreg",
    version,
    about = "Bayesian regression with responses on the circle, sphere or torus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from the reference curve f0(t) = (t + 0.5)^2.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit a dataset and score the fit against the reference curve.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset CSV written by `generate`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// CSV file to append the result row to.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Replicated fits over a list of values of c, K or n.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// One of c, K, n.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
    /// Posterior contraction-rate experiment.
    Contract {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated sample sizes.
        #[arg(long = "n-values", value_delimiter = ',', num_args = 1..)]
        n_values: Vec<usize>,
    },
    /// Numerical self-checks of the heat kernels and path metrics.
    CheckKernels {
        #[arg(long)]
        seed: Option<u64>,
        /// Adds a constant to every kernel value (fault injection).
        #[arg(long, hide = true)]
        inject_kernel_offset: Option<f64>,
    },
}

/// Flags shared by the experiment commands.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON file supplying any of these flags (kebab-case keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// circle, sphere or torus.
    #[arg(long)]
    pub manifold: Option<String>,
    /// dbm, cbm or ker.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Fit with σ² marginalized uniformly over [1/A, A].
    #[arg(long = "marginal-A")]
    pub marginal_a: Option<f64>,
    /// Prior scale.
    #[arg(long)]
    pub c: Option<f64>,
    /// Number of DBM pieces (exclusive with --rate-epsilon).
    #[arg(long = "grid-K")]
    pub grid_k: Option<usize>,
    /// Set K from the contraction-rate sidelength rule.
    #[arg(long)]
    pub rate_epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub anneal_t0: Option<f64>,
    #[arg(long)]
    pub anneal_cool: Option<f64>,
    #[arg(long)]
    pub anneal_steps: Option<usize>,
    /// Worker threads for sweeps and the contraction experiment.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write 0 in the runtime_ms column so output is byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub manifold: Option<String>,
    pub method: Option<String>,
    pub n: Option<usize>,
    pub sigma2: Option<f64>,
    #[serde(rename = "marginal-A")]
    pub marginal_a: Option<f64>,
    pub c: Option<f64>,
    #[serde(rename = "grid-K")]
    pub grid_k: Option<usize>,
    pub rate_epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub out: Option<PathBuf>,
    pub anneal_t0: Option<f64>,
    pub anneal_cool: Option<f64>,
    pub anneal_steps: Option<usize>,
    pub threads: Option<usize>,
    pub no_timing: Option<bool>,
    pub data: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub axis: Option<String>,
    pub values: Option<Vec<f64>>,
    pub n_values: Option<Vec<usize>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path)
            .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

fn config_err(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Which command the settings are resolved for; a few defaults differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Generate,
    Fit,
    Sweep,
    Contract,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone)]
struct Settings {
    manifold: ManifoldKind,
    method: Method,
    experiment: ExperimentConfig,
    seed: u64,
    replicates: usize,
    out: Option<PathBuf>,
    threads: Option<usize>,
}

fn resolve(args: &CommonArgs, file: &FileConfig, mode: Mode) -> Result<Settings, CliError> {
    let manifold: ManifoldKind = args
        .manifold
        .clone()
        .or(file.manifold.clone())
        .map(|s| s.parse().map_err(config_err))
        .transpose()?
        .unwrap_or(ManifoldKind::Circle);
    let method_name = args.method.clone().or(file.method.clone());
    let method = match method_name.as_deref() {
        None => Method::Dbm,
        Some(s) => match s.parse().map_err(config_err)? {
            Method::Constant => {
                return Err(CliError::Config(
                    "the constant baseline is library-only; use dbm, cbm or ker".into(),
                ))
            }
            m => m,
        },
    };
    let grid_k = args.grid_k.or(file.grid_k);
    let rate_epsilon = args.rate_epsilon.or(file.rate_epsilon);
    if grid_k.is_some() && rate_epsilon.is_some() {
        return Err(CliError::Config(
            "--grid-K and --rate-epsilon are mutually exclusive".into(),
        ));
    }
    let sigma2 = args.sigma2.or(file.sigma2).unwrap_or(0.1);
    let default_scale = if mode == Mode::Contract { 1.0 } else { 0.01 };
    let defaults = AnnealConfig::default();
    let anneal = AnnealConfig {
        initial_temperature: args.anneal_t0.or(file.anneal_t0).unwrap_or(defaults.initial_temperature),
        cooling_factor: args.anneal_cool.or(file.anneal_cool).unwrap_or(defaults.cooling_factor),
        steps_per_temperature: args
            .anneal_steps
            .or(file.anneal_steps)
            .unwrap_or(defaults.steps_per_temperature),
        ..defaults
    };
    let experiment = ExperimentConfig {
        n: args.n.or(file.n).unwrap_or(30),
        sigma2,
        fit_sigma: args.marginal_a.or(file.marginal_a).map(SigmaMode::marginal),
        scale: args.c.or(file.c).unwrap_or(default_scale),
        segments: grid_k.unwrap_or(40),
        rate_epsilon,
        anneal,
        timing: !(args.no_timing || file.no_timing.unwrap_or(false)),
        ..ExperimentConfig::default()
    };
    // the contraction command validates its own pieces
    if mode != Mode::Contract {
        experiment.validate().map_err(config_err)?;
    }
    let default_replicates = match mode {
        Mode::Sweep => 10,
        Mode::Contract => 5,
        _ => 1,
    };
    let replicates = args.replicates.or(file.replicates).unwrap_or(default_replicates);
    if replicates == 0 {
        return Err(CliError::Config("--replicates must be positive".into()));
    }
    let threads = args.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    Ok(Settings {
        manifold,
        method,
        experiment,
        seed: args.seed.or(file.seed).unwrap_or(0),
        replicates,
        out: args.out.clone().or(file.out.clone()),
        threads,
    })
}

/// Binds `$m` to the manifold named by `$kind`. The sphere's series cap is
/// raised to cover `$min_time`; the circle and torus use image sums at
/// small times and need no adjustment.
macro_rules! with_manifold {
    ($kind:expr, $min_time:expr, $m:ident => $body:expr) => {
        match $kind {
            ManifoldKind::Circle => {
                let $m = Circle::new();
                $body
            }
            ManifoldKind::Sphere => {
                let cfg = HeatKernelConfig::default().covering_time($min_time);
                let $m = Sphere::with_config(cfg).map_err(config_err)?;
                $body
            }
            ManifoldKind::Torus => {
                let $m = Torus::new();
                $body
            }
        }
    };
}

/// Destination for the primary output of a command.
enum Sink<'a> {
    File(BufWriter<File>, PathBuf),
    Stdout(&'a mut dyn Write),
}

impl Sink<'_> {
    fn open<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Sink<'a>, CliError> {
        match path {
            Some(p) => {
                let file = File::create(p).map_err(|e| {
                    CliError::Config(format!("cannot create {}: {e}", p.display()))
                })?;
                Ok(Sink::File(BufWriter::new(file), p.clone()))
            }
            None => Ok(Sink::Stdout(stdout)),
        }
    }

    fn writer(&mut self) -> &mut dyn Write {
        match self {
            Sink::File(w, _) => w,
            Sink::Stdout(w) => *w,
        }
    }

    fn describe(&self) -> String {
        match self {
            Sink::File(_, p) => p.display().to_string(),
            Sink::Stdout(_) => "stdout".into(),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        if let Sink::File(mut w, p) = self {
            w.flush()
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))?;
        }
        Ok(())
    }
}

fn io_runtime(e: io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn cmd_generate(
    s: &Settings,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    with_manifold!(s.manifold, s.experiment.sigma2, m => {
        let data = replicate_dataset(&m, &s.experiment, s.seed).map_err(runtime_err)?;
        let mut sink = Sink::open(&s.out, stdout)?;
        data.write_csv(&m, sink.writer()).map_err(runtime_err)?;
        let dest = sink.describe();
        sink.finish()?;
        writeln!(
            stderr,
            "generated {} observations on the {} (sigma2 = {}, seed = {}) -> {}",
            data.len(), s.manifold, s.experiment.sigma2, s.seed, dest
        )
        .map_err(io_runtime)
    })
}

fn cmd_fit(
    s: &Settings,
    data_path: &Path,
    results: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let min_time = s.experiment.smallest_kernel_time(s.method);
    with_manifold!(s.manifold, min_time, m => fit_on(&m, s, data_path, results, stdout, stderr))
}

fn fit_on<M: ReferenceCurve>(
    m: &M,
    s: &Settings,
    data_path: &Path,
    results: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let file = File::open(data_path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", data_path.display())))?;
    let data: Dataset<M::Point> = Dataset::read_csv(m, BufReader::new(file)).map_err(config_err)?;
    let mut cfg = s.experiment.clone();
    cfg.n = data.len();
    cfg.validate().map_err(config_err)?;

    let started = std::time::Instant::now();
    // same stream as a replicate with this seed, so `generate` + `fit`
    // reproduces the harness
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[s.seed, 1]));
    let fitted = fit_method(m, &data, s.method, &cfg, &mut rng).map_err(runtime_err)?;
    let l1 = l1_error(m, &fitted.path, &Reference, &cfg.grid).map_err(runtime_err)?;
    if !l1.is_finite() {
        return Err(CliError::Runtime("non-finite L1 error".into()));
    }
    let runtime_ms = if cfg.timing { started.elapsed().as_millis() as u64 } else { 0 };

    let mut doc = match &fitted.anneal {
        Some(fit) => fit.to_json_value::<M>().map_err(runtime_err)?,
        None => json!({ "path": fitted.path.to_json_value::<M>().map_err(runtime_err)? }),
    };
    doc["method"] = json!(s.method.name());
    doc["l1_error"] = json!(l1);
    if let Some(h) = fitted.bandwidth {
        doc["bandwidth"] = json!(h);
    }
    let mut sink = Sink::open(&s.out, stdout)?;
    let text = serde_json::to_string_pretty(&doc).map_err(|e| runtime_err(e.into()))?;
    writeln!(sink.writer(), "{text}").map_err(io_runtime)?;
    let dest = sink.describe();
    sink.finish()?;

    let row = ExperimentResult {
        run_id: format!("fit-{}-{}", s.method, s.seed),
        method: s.method,
        n: data.len(),
        k: method_segments(s.method, &cfg),
        c: cfg.scale,
        sigma2: cfg.sigma2,
        seed: s.seed,
        l1_error: l1,
        runtime_ms,
        knot_tv: fitted.path.knot_total_variation(m),
    };
    if let Some(path) = results {
        append_row(path, &row)?;
    }
    let mut line = format!("{} fit on {} observations: l1_error = {l1:.6}", s.method, data.len());
    if let Some(h) = fitted.bandwidth {
        line.push_str(&format!(", bandwidth = {h}"));
    }
    if let Some(fit) = &fitted.anneal {
        line.push_str(&format!(", best_log_posterior = {:.6}", fit.best_log_posterior));
    }
    writeln!(stderr, "{line} -> {dest}").map_err(io_runtime)
}

fn append_row(path: &Path, row: &ExperimentResult) -> Result<(), CliError> {
    let fresh = std::fs::metadata(path).map(|md| md.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let rows = std::slice::from_ref(row);
    if fresh {
        write_results_csv(rows, file).map_err(runtime_err)
    } else {
        append_results_csv(rows, file).map_err(runtime_err)
    }
}

fn cmd_sweep(
    s: &Settings,
    axis: SweepAxis,
    values: &[f64],
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    // smallest time over all cells
    let min_time = values
        .iter()
        .filter_map(|v| axis.apply(&s.experiment, *v).ok())
        .map(|cfg| cfg.smallest_kernel_time(s.method))
        .fold(s.experiment.smallest_kernel_time(s.method), f64::min);
    let rows = with_manifold!(s.manifold, min_time, m => sweep(
        &m, s.method, &s.experiment, axis, values, s.replicates, s.seed, s.threads,
    ))
    .map_err(|e| match e {
        Error::InvalidConfig(_) => config_err(e),
        other => runtime_err(other),
    })?;
    let mut sink = Sink::open(&s.out, stdout)?;
    write_results_csv(&rows, sink.writer()).map_err(runtime_err)?;
    let dest = sink.describe();
    sink.finish()?;
    writeln!(
        stderr,
        "sweep: {} values x {} replicates of {} -> {}",
        values.len(),
        s.replicates,
        s.method,
        dest
    )
    .map_err(io_runtime)
}

fn cmd_contract(
    s: &Settings,
    n_values: &[usize],
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = ContractionConfig {
        sigma2: s.experiment.sigma2,
        scale: s.experiment.scale,
        epsilon: s.experiment.rate_epsilon.unwrap_or(0.05),
        replicates: s.replicates,
        ..ContractionConfig::default()
    };
    if s.experiment.scale <= 0.0 || !s.experiment.scale.is_finite() {
        return Err(CliError::Config("--c must be positive".into()));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 0.25) {
        return Err(CliError::Config("--rate-epsilon must lie in (0, 1/4)".into()));
    }
    if n_values.len() < 3 || n_values.iter().any(|&n| n < 2) {
        return Err(CliError::Config(
            "--n-values needs at least three sample sizes, each at least 2".into(),
        ));
    }
    let min_time = cfg.smallest_kernel_time(n_values);
    let report = with_manifold!(s.manifold, min_time, m => contraction(&m, &cfg, n_values, s.seed, s.threads))
        .map_err(runtime_err)?;
    if let Some(path) = &s.out {
        let file = File::create(path)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
        report.write_csv(BufWriter::new(file)).map_err(runtime_err)?;
        writeln!(stderr, "per-replicate rows -> {}", path.display()).map_err(io_runtime)?;
    }
    writeln!(stdout, "n,K,mean_posterior_d1").map_err(io_runtime)?;
    for (n, err) in &report.means {
        let k = report.rows.iter().find(|r| r.n == *n).map(|r| r.k).unwrap_or(0);
        writeln!(stdout, "{n},{k},{err}").map_err(io_runtime)?;
    }
    writeln!(stdout, "slope,{}", report.slope).map_err(io_runtime)
}

fn cmd_check_kernels(seed: u64, offset: Option<f64>, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut config = HeatKernelConfig::default();
    if let Some(off) = offset {
        config = config.with_density_offset(off);
    }
    let report = run_kernel_checks(&config, seed).map_err(runtime_err)?;
    writeln!(stdout, "{report}").map_err(io_runtime)?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn load_file(common: &CommonArgs) -> Result<FileConfig, CliError> {
    match &common.config {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Generate { common } => {
            let file = load_file(&common)?;
            let s = resolve(&common, &file, Mode::Generate)?;
            cmd_generate(&s, stdout, stderr)?;
        }
        Command::Fit { common, data, results } => {
            let file = load_file(&common)?;
            let s = resolve(&common, &file, Mode::Fit)?;
            let data = data
                .or(file.data.clone())
                .ok_or_else(|| CliError::Config("fit needs --data".into()))?;
            let results = results.or(file.results.clone());
            cmd_fit(&s, &data, results.as_deref(), stdout, stderr)?;
        }
        Command::Sweep { common, axis, values } => {
            let file = load_file(&common)?;
            let s = resolve(&common, &file, Mode::Sweep)?;
            let axis: SweepAxis = axis
                .or(file.axis.clone())
                .ok_or_else(|| CliError::Config("sweep needs --axis".into()))?
                .parse()
                .map_err(config_err)?;
            let values = if values.is_empty() {
                file.values.clone().unwrap_or_default()
            } else {
                values
            };
            if values.len() < 2 {
                return Err(CliError::Config("sweep needs at least two --values".into()));
            }
            cmd_sweep(&s, axis, &values, stdout, stderr)?;
        }
        Command::Contract { common, n_values } => {
            let file = load_file(&common)?;
            let s = resolve(&common, &file, Mode::Contract)?;
            let n_values = if n_values.is_empty() {
                file.n_values.clone().unwrap_or_else(|| vec![50, 200, 800])
            } else {
                n_values
            };
            cmd_contract(&s, &n_values, stdout, stderr)?;
        }
        Command::CheckKernels { seed, inject_kernel_offset } => {
            return cmd_check_kernels(seed.unwrap_or(0), inject_kernel_offset, stdout);
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "heatreg: {e}");
            e.exit_code()
        }
    }
}
