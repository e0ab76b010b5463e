use std::fs;
use std::path::Path;

use heatreg::baseline::bandwidth_rule;
use heatreg::cli::{run, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK};
use heatreg::experiment::{run_replicate, ExperimentConfig, Method};
use heatreg::manifold::Circle;
use heatreg::posterior::Dataset;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn heatreg(args: &[&str]) -> Output {
    let mut argv = vec!["heatreg"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let file = dir.join(name);
    let mut args = vec!["generate", "--out", path_str(&file)];
    args.extend_from_slice(extra);
    let out = heatreg(&args);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    file
}

#[test]
fn generate_writes_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let file = generate(dir.path(), "d.csv", &["--seed", "3"]);
    let text = fs::read_to_string(&file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,coord1"));
    assert_eq!(lines.count(), 30);

    let again = generate(dir.path(), "e.csv", &["--seed", "3"]);
    assert_eq!(fs::read(&file).unwrap(), fs::read(&again).unwrap());
    let other = generate(dir.path(), "f.csv", &["--seed", "4"]);
    assert_ne!(fs::read(&file).unwrap(), fs::read(&other).unwrap());

    let sphere = generate(dir.path(), "s.csv", &["--manifold", "sphere", "--n", "5"]);
    let text = fs::read_to_string(sphere).unwrap();
    assert!(text.starts_with("t,coord1,coord2,coord3\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn generate_rejects_bad_input() {
    assert_eq!(heatreg(&["generate", "--n", "0"]).code, EXIT_CONFIG);
    assert_eq!(heatreg(&["generate", "--manifold", "klein"]).code, EXIT_CONFIG);
    assert_eq!(heatreg(&["generate", "--sigma2", "-1"]).code, EXIT_CONFIG);
    assert_eq!(heatreg(&["frobnicate"]).code, EXIT_CONFIG);
    assert_eq!(heatreg(&["--help"]).code, EXIT_OK);
}

#[test]
fn fit_reports_a_small_error_and_appends_results() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.csv", &["--seed", "11"]);
    let results = dir.path().join("results.csv");
    let fit_json = dir.path().join("fit.json");
    let out = heatreg(&[
        "fit", "--method", "dbm", "--seed", "11",
        "--data", path_str(&data),
        "--results", path_str(&results),
        "--out", path_str(&fit_json),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&fit_json).unwrap()).unwrap();
    let l1 = doc["l1_error"].as_f64().unwrap();
    assert!(l1 < 0.5, "l1 = {l1}");
    assert_eq!(doc["method"], "dbm");
    for key in ["path", "best_log_posterior", "acceptance_rate", "trace_subsampled"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["path"]["K"], 40);

    // the same seed reproduces the library replicate
    let cfg = ExperimentConfig::default();
    let row = run_replicate(&Circle::new(), Method::Dbm, &cfg, 11, "x".into()).unwrap();
    assert_eq!(row.l1_error, l1);

    let out = heatreg(&[
        "fit", "--method", "ker", "--seed", "11",
        "--data", path_str(&data),
        "--results", path_str(&results),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let doc: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let dataset: Dataset<heatreg::manifold::Angle> =
        Dataset::read_csv(&Circle::new(), fs::File::open(&data).unwrap()).unwrap();
    let h = bandwidth_rule(&dataset.ts()).unwrap();
    assert_eq!(doc["bandwidth"].as_f64().unwrap(), h);

    let rows = fs::read_to_string(&results).unwrap();
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("run_id,method,n,K,c,sigma2,seed,l1_error,runtime_ms"));
    assert!(lines[1].contains(",dbm,"));
    assert!(lines[2].contains(",ker,"));
}

#[test]
fn fit_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.csv", &[]);
    let d = path_str(&data);
    assert_eq!(heatreg(&["fit", "--method", "magic", "--data", d]).code, EXIT_CONFIG);
    assert_eq!(heatreg(&["fit", "--method", "constant", "--data", d]).code, EXIT_CONFIG);
    assert_eq!(heatreg(&["fit", "--data", "/nonexistent/data.csv"]).code, EXIT_CONFIG);
    assert_eq!(heatreg(&["fit"]).code, EXIT_CONFIG);
    assert_eq!(
        heatreg(&["fit", "--data", d, "--grid-K", "10", "--rate-epsilon", "0.05"]).code,
        EXIT_CONFIG
    );
}

#[test]
fn sweep_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run_with = |threads: &str, name: &str| {
        let out_file = dir.path().join(name);
        let out = heatreg(&[
            "sweep", "--axis", "c", "--values", "0.01,1",
            "--replicates", "3", "--n", "15", "--anneal-steps", "20",
            "--seed", "5", "--threads", threads, "--no-timing",
            "--out", path_str(&out_file),
        ]);
        assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
        fs::read(out_file).unwrap()
    };
    let one = run_with("1", "a.csv");
    let four = run_with("4", "b.csv");
    assert_eq!(one, four);
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 1 + 2 * 3);
}

#[test]
fn sweep_rejects_bad_axes() {
    assert_eq!(heatreg(&["sweep", "--axis", "c", "--values", "0.1"]).code, EXIT_CONFIG);
    assert_eq!(heatreg(&["sweep", "--axis", "q", "--values", "1,2"]).code, EXIT_CONFIG);
    assert_eq!(heatreg(&["sweep", "--axis", "K", "--values", "0,2"]).code, EXIT_CONFIG);
    assert_eq!(
        heatreg(&["sweep", "--axis", "K", "--values", "2,4", "--rate-epsilon", "0.05"]).code,
        EXIT_CONFIG
    );
}

#[test]
fn check_kernels_passes_and_detects_faults() {
    let out = heatreg(&["check-kernels", "--seed", "1"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stdout);
    let summary = out.stdout.lines().last().unwrap();
    assert!(summary.contains("all checks passed"), "{summary}");
    let reported: f64 = summary
        .split("semigroup max error ")
        .nth(1)
        .and_then(|s| s.split(';').next())
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(reported < 1e-6);

    let broken = heatreg(&["check-kernels", "--inject-kernel-offset", "0.001"]);
    assert_eq!(broken.code, EXIT_CHECK_FAILED);
    assert!(broken.stdout.contains("FAIL"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 7, "seed": 2, "manifold": "torus"}"#).unwrap();
    let from_file = generate(dir.path(), "a.csv", &["--config", path_str(&cfg)]);
    let text = fs::read_to_string(from_file).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.starts_with("t,coord1,coord2\n"));

    let overridden = generate(dir.path(), "b.csv", &["--config", path_str(&cfg), "--n", "4"]);
    assert_eq!(fs::read_to_string(overridden).unwrap().lines().count(), 5);

    fs::write(&cfg, r#"{"n": 7, "colour": "blue"}"#).unwrap();
    assert_eq!(heatreg(&["generate", "--config", path_str(&cfg)]).code, EXIT_CONFIG);
    fs::write(&cfg, r#"{"grid-K": 7, "rate-epsilon": 0.05}"#).unwrap();
    assert_eq!(heatreg(&["generate", "--config", path_str(&cfg)]).code, EXIT_CONFIG);
}

#[test]
fn contraction_is_deterministic() {
    let args = [
        "contract", "--n-values", "10,20,40", "--replicates", "2",
        "--seed", "3", "--threads", "2", "--rate-epsilon", "0.05",
    ];
    let a = heatreg(&args);
    assert_eq!(a.code, EXIT_OK, "{}", a.stderr);
    let b = heatreg(&args);
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<&str> = a.stdout.lines().collect();
    assert_eq!(lines[0], "n,K,mean_posterior_d1");
    assert_eq!(lines.len(), 5);
    for row in &lines[1..4] {
        let err: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(err > 0.0 && err.is_finite());
    }
    assert!(lines[4].starts_with("slope,"));

    assert_eq!(heatreg(&["contract", "--n-values", "10,20"]).code, EXIT_CONFIG);
    assert_eq!(
        heatreg(&["contract", "--n-values", "10,20,40", "--rate-epsilon", "0.3"]).code,
        EXIT_CONFIG
    );
}
