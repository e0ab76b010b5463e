//! Draws from the discretized Brownian-motion prior on piecewise-geodesic
//! paths and shows how the scale `c` controls roughness.
//!
//! cargo run --release --example prior_sampling

use heatreg::manifold::{Circle, Sphere};
use heatreg::path::{log_prior, sample_prior_path, PriorSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> heatreg::Result<()> {
    let circle = Circle::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!("circle, K = 40: mean knot total variation over 200 draws");
    for c in [0.01, 0.1, 1.0, 10.0] {
        let spec = PriorSpec::new(40, c)?;
        let mut tv = 0.0;
        for _ in 0..200 {
            tv += sample_prior_path(&spec, &circle, &mut rng)?.knot_total_variation(&circle);
        }
        println!("  c = {c:<5} {:.4}", tv / 200.0);
    }

    let sphere = Sphere::new();
    let spec = PriorSpec::new(10, 1.0)?;
    let path = sample_prior_path(&spec, &sphere, &mut rng)?;
    println!("\nsphere draw (K = 10, c = 1), log prior {:.4}", log_prior(&path, &spec, &sphere)?);
    for k in 0..=path.segments() {
        let p = path.knot(k).as_array();
        println!("  t={:.1}  ({:+.4}, {:+.4}, {:+.4})", path.knot_time(k), p[0], p[1], p[2]);
    }
    println!("\npath JSON: {}", path.to_json::<Sphere>()?);
    Ok(())
}
