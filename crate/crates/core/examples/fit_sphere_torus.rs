//! DBM and kernel regression on the sphere and the torus, with the
//! sphere's series cap sized for the prior's small step time.
//!
//! cargo run --release --example fit_sphere_torus

use heatreg::experiment::{fit_method, replicate_dataset, ExperimentConfig, Method};
use heatreg::manifold::{Sphere, Torus};
use heatreg::metrics::{l1_error, Reference, ReferenceCurve};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report<M: ReferenceCurve>(name: &str, m: &M, cfg: &ExperimentConfig) -> heatreg::Result<()> {
    let data = replicate_dataset(m, cfg, 11)?;
    for method in [Method::Dbm, Method::Ker] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fitted = fit_method(m, &data, method, cfg, &mut rng)?;
        println!("{name:<7} {method}: L1 = {:.4}", l1_error(m, &fitted.path, &Reference, &cfg.grid)?);
    }
    Ok(())
}

fn main() -> heatreg::Result<()> {
    let cfg = ExperimentConfig { n: 60, ..ExperimentConfig::default() };
    let sphere = Sphere::with_config(cfg.kernel_config(Method::Dbm))?;
    report("sphere", &sphere, &cfg)?;
    report("torus", &Torus::new(), &cfg)?;
    Ok(())
}
