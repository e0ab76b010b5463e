//! Nadaraya–Watson regression with Fréchet-mean averaging and the
//! rule-of-thumb bandwidth.
//!
//! cargo run --release --example kernel_regression

use heatreg::baseline::{bandwidth_rule, frechet_mean_weighted, KernelFit};
use heatreg::experiment::{replicate_dataset, ExperimentConfig};
use heatreg::manifold::{Angle, Circle, Manifold};
use heatreg::metrics::{l1_error, QuadratureGrid, Reference};

fn main() -> heatreg::Result<()> {
    let m = Circle::new();
    // averaging respects the wrap-around
    let mean = frechet_mean_weighted(&m, &[Angle::new(0.1), Angle::new(6.2)], &[1.0, 1.0])?;
    println!("Fréchet mean of 0.1 and 6.2 rad: {:.4} (arithmetic mean 3.15)", mean.radians());

    let data = replicate_dataset(&m, &ExperimentConfig::default(), 5)?;
    let h = bandwidth_rule(&data.ts())?;
    println!("rule-of-thumb bandwidth: {h:.4}");
    let grid = QuadratureGrid::default();
    for scale in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let fit = KernelFit::new(&data, scale * h)?;
        println!("  h × {scale:<4}: L1 = {:.4}", l1_error(&m, &fit, &Reference, &grid)?);
    }
    let fit = KernelFit::with_rule_of_thumb(&data)?;
    println!("prediction at t = 0.5: {:.4} (truth 1.0)", fit.predict(&m, 0.5)?.radians());
    println!("distance to truth: {:.4}", m.distance(&fit.predict(&m, 0.5)?, &Angle::new(1.0)));
    Ok(())
}
