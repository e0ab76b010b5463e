//! Runs the kernel and metric self-checks, then again with a deliberately
//! perturbed kernel to show the normalization check catching it.
//!
//! cargo run --release --example kernel_checks

use heatreg::checks::run_kernel_checks;
use heatreg::manifold::HeatKernelConfig;

fn main() -> heatreg::Result<()> {
    let report = run_kernel_checks(&HeatKernelConfig::default(), 0)?;
    println!("{report}\n");
    let broken = HeatKernelConfig::default().with_density_offset(1e-3);
    let report = run_kernel_checks(&broken, 0)?;
    for failure in report.failures() {
        println!("{failure}");
    }
    Ok(())
}
