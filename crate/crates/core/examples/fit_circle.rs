//! The circle regression problem with f0(t) = (t + 0.5)²: generate data,
//! fit DBM, CBM and kernel regression, and compare L1 errors.
//!
//! cargo run --release --example fit_circle

use heatreg::experiment::{fit_method, replicate_dataset, ExperimentConfig, Method};
use heatreg::manifold::Circle;
use heatreg::metrics::{l1_error, Reference};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> heatreg::Result<()> {
    let m = Circle::new();
    let cfg = ExperimentConfig::default(); // n = 30, σ² = 0.1, c = 0.01, K = 40
    let data = replicate_dataset(&m, &cfg, 2024)?;
    println!("{} observations, first: t = {:.3}, x = {:.3}", data.len(), data.observations()[0].t, data.observations()[0].x.radians());

    for method in [Method::Dbm, Method::Cbm, Method::Ker, Method::Constant] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fitted = fit_method(&m, &data, method, &cfg, &mut rng)?;
        let err = l1_error(&m, &fitted.path, &Reference, &cfg.grid)?;
        let extra = match (&fitted.anneal, fitted.bandwidth) {
            (Some(fit), _) => format!(
                "log posterior {:.3}, acceptance {:.3}",
                fit.best_log_posterior, fit.acceptance_rate
            ),
            (None, Some(h)) => format!("bandwidth {h:.4}"),
            _ => String::new(),
        };
        println!("{method:<8} L1 = {err:.4}  {extra}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dbm = fit_method(&m, &data, Method::Dbm, &cfg, &mut rng)?;
    println!("\nDBM fit at t = 0, 0.5, 1: {:.3} {:.3} {:.3} (truth 0.250 1.000 2.250)",
        dbm.path.eval(&m, 0.0)?.radians(),
        dbm.path.eval(&m, 0.5)?.radians(),
        dbm.path.eval(&m, 1.0)?.radians());
    Ok(())
}
