//! Replicated sweeps over the prior scale c and the grid size K, run on a
//! worker pool with per-cell seeds.
//!
//! cargo run --release --example sweeps

use heatreg::experiment::{mean_by, sweep, write_results_csv, ExperimentConfig, Method, SweepAxis};
use heatreg::manifold::Circle;

fn main() -> heatreg::Result<()> {
    let m = Circle::new();
    let cfg = ExperimentConfig { timing: false, ..ExperimentConfig::default() };

    let rows = sweep(&m, Method::Dbm, &cfg, SweepAxis::Scale, &[0.01, 0.1, 1.0, 10.0], 5, 1, None)?;
    println!("c      mean knot TV   mean L1");
    let tv = mean_by(&rows, |r| r.c.to_bits(), |r| r.knot_tv);
    let l1 = mean_by(&rows, |r| r.c.to_bits(), |r| r.l1_error);
    for ((c, t), (_, e)) in tv.iter().zip(&l1) {
        println!("{:<6} {t:<14.4} {e:.4}", f64::from_bits(*c));
    }

    let rows = sweep(&m, Method::Dbm, &cfg, SweepAxis::Segments, &[1.0, 5.0, 40.0], 5, 2, Some(4))?;
    println!("\nK    mean L1");
    for (k, e) in mean_by(&rows, |r| r.k, |r| r.l1_error) {
        println!("{k:<4} {e:.4}");
    }
    println!();
    write_results_csv(&rows, std::io::stdout())
}
