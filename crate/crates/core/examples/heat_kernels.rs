//! Heat kernels on the circle, sphere and torus: values, the two circle
//! representations, and exact sampling.
//!
//! cargo run --release --example heat_kernels

use heatreg::manifold::{
    circle_eigen_sum, circle_wrapped_sum, Angle, Circle, HeatKernelConfig, Manifold, Sphere,
    Torus, TorusPoint, UnitVector3,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> heatreg::Result<()> {
    let circle = Circle::new();
    let cfg = HeatKernelConfig::default();
    println!("circle p_t(0, δ): wrapped vs eigen representation");
    for t in [0.05, 0.5, 2.0] {
        for delta in [0.0, 1.0, std::f64::consts::PI] {
            let w = circle_wrapped_sum(t, delta, &cfg);
            let e = circle_eigen_sum(t, delta, &cfg);
            println!("  t={t:<4} δ={delta:.3}  {w:.12}  {e:.12}  diff={:.1e}", (w - e).abs());
        }
    }

    let sphere = Sphere::new();
    let north = UnitVector3::north();
    println!("\nsphere p_t(north, ·) along a meridian, t = 0.1");
    for theta in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let y = UnitVector3::from_spherical(theta, 0.0);
        println!("  θ={theta:<4} {:.6e}", sphere.heat_kernel(0.1, &north, &y)?);
    }

    let torus = Torus::new();
    let o = TorusPoint::new(0.0, 0.0);
    let p = TorusPoint::new(0.3, -0.2);
    println!(
        "\ntorus p_0.2(o, p) = {:.6} = circle × circle = {:.6}",
        torus.heat_kernel(0.2, &o, &p)?,
        circle.heat_kernel(0.2, &Angle::new(0.0), &Angle::new(0.3))?
            * circle.heat_kernel(0.2, &Angle::new(0.0), &Angle::new(-0.2))?
    );

    // sampling: the first circular moment of p_t(0, ·) is e^{-t/2}
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = 0.4;
    let n = 100_000;
    let (mut c, mut s) = (0.0, 0.0);
    for _ in 0..n {
        let x = circle.sample_heat_kernel(t, &Angle::new(0.0), &mut rng)?;
        c += x.radians().cos();
        s += x.radians().sin();
    }
    let r = (c * c + s * s).sqrt() / n as f64;
    println!("\ncircle sampler: resultant length {r:.4} vs e^(-t/2) = {:.4}", (-t / 2.0f64).exp());
    Ok(())
}
