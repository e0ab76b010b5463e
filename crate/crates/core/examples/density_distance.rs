//! The distance between induced joint densities compared with the path
//! metrics it is sandwiched between.
//!
//! cargo run --release --example density_distance

use heatreg::manifold::Circle;
use heatreg::metrics::{
    circle_kernel_lipschitz, density_distance, dinf_distance, dq_distance, PredictorDensity,
    QuadratureGrid,
};
use heatreg::path::{sample_prior_path, PriorSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> heatreg::Result<()> {
    let m = Circle::new();
    let sigma2 = 0.1;
    let p = PredictorDensity::uniform();
    let grid = QuadratureGrid::new(128)?;
    let c = circle_kernel_lipschitz(&m, sigma2, 4096)? * std::f64::consts::TAU;
    let spec = PriorSpec::new(6, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    println!("d1        dD        dinf      C·dinf   (C = {c:.3})");
    for _ in 0..8 {
        let f = sample_prior_path(&spec, &m, &mut rng)?;
        let g = sample_prior_path(&spec, &m, &mut rng)?;
        let d1 = dq_distance(&m, &f, &g, 1.0, &p, &grid)?;
        let dd = density_distance(&m, &f, &g, 1.0, sigma2, &p, &grid, 256)?;
        let di = dinf_distance(&m, &f, &g, &grid);
        println!("{d1:<9.4} {dd:<9.4} {di:<9.4} {:.4}", c * di);
    }
    Ok(())
}
