//! Metropolis sampling of the DBM posterior and the posterior mean error.
//!
//! cargo run --release --example posterior_sampling

use heatreg::experiment::{replicate_dataset, ExperimentConfig};
use heatreg::inference::{mh_sample, McmcConfig};
use heatreg::manifold::Circle;
use heatreg::metrics::{l1_error, QuadratureGrid, Reference};
use heatreg::path::PriorSpec;
use heatreg::posterior::SigmaMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> heatreg::Result<()> {
    let m = Circle::new();
    let cfg = ExperimentConfig { n: 100, ..ExperimentConfig::default() };
    let data = replicate_dataset(&m, &cfg, 9)?;
    let spec = PriorSpec::new(8, 1.0)?;
    let mcmc = McmcConfig { iterations: 90_000, burn_in: 18_000, thinning: 9, proposal_time: 0.02 };
    let grid = QuadratureGrid::default();
    for sigma in [SigmaMode::Known(0.1), SigmaMode::marginal(2.0)] {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let run = mh_sample(&data, &sigma, &spec, &mcmc, &m, &mut rng)?;
        let mut err = 0.0;
        for s in &run.samples {
            err += l1_error(&m, s, &Reference, &grid)?;
        }
        println!(
            "{sigma:?}: {} samples, acceptance {:.3}, posterior mean d1 {:.4}",
            run.samples.len(),
            run.acceptance_rate,
            err / run.samples.len() as f64
        );
    }
    Ok(())
}
