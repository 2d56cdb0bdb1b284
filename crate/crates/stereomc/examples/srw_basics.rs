//! The projection and the random walk on the sphere.
//!
//! Maps a few points through the preconditioned stereographic projection,
//! shows the uniform-on-sphere special case (a multivariate t with dof = d
//! under gamma = (0, d I) accepts every proposal), then samples a Gaussian
//! and recovers its moments.
//!
//! ```bash
//! cargo run --release --example srw_basics
//! ```

use nalgebra::DVector;
use stereomc::geometry::{sp_forward, sp_inverse, Precondition};
use stereomc::rng::chain_rng;
use stereomc::srw::{srw_step, SrwConfig, SrwState};
use stereomc::targets::{Gaussian, StudentT};

fn main() -> stereomc::Result<()> {
    let d = 10;
    let p = Precondition::isotropic(d, d as f64)?;

    println!("-- the chart gamma = (0, {d} I) on S^{d} --");
    for r in [0.0, 1.0, 10.0, 1e6] {
        let mut x = DVector::zeros(d);
        x[0] = r;
        let z = sp_inverse(&p, &x)?;
        let back = sp_forward(&p, &z)?;
        println!(
            "|x| = {r:8.1e}  ->  latitude {:+.6}  ->  back, error {:.1e}",
            z.latitude(),
            (back - &x).norm()
        );
    }

    println!("\n-- uniform case: t(dof = d) target, every proposal accepted --");
    let target = StudentT::new(d as f64, d)?;
    let cfg = SrwConfig::new(0.5)?;
    let mut rng = chain_rng(7, 0);
    let mut state = SrwState::from_x(&p, &target, &DVector::from_element(d, 1.0))?;
    let mut worst: f64 = 0.0;
    for _ in 0..5000 {
        let step = srw_step(&mut state, &cfg, &p, &target, &mut rng)?;
        worst = worst.max((step.accept_prob - 1.0).abs());
    }
    println!("max |accept_prob - 1| over 5000 steps: {worst:.2e}");

    println!("\n-- moment recovery on N(0, I_5) --");
    let d = 5;
    let target = Gaussian::standard(d);
    let p = Precondition::isotropic(d, d as f64)?;
    let cfg = SrwConfig::new(0.5)?;
    let mut state = SrwState::from_x(&p, &target, &DVector::zeros(d))?;
    let n = 100_000;
    let (mut accepted, mut s1, mut s2) = (0u64, 0.0, 0.0);
    for _ in 0..n {
        accepted += srw_step(&mut state, &cfg, &p, &target, &mut rng)?.accepted as u64;
        s1 += state.x[0];
        s2 += state.x[0] * state.x[0];
    }
    let mean = s1 / n as f64;
    println!(
        "acceptance {:.3}, first-coordinate mean {mean:+.4}, variance {:.4}",
        accepted as f64 / n as f64,
        s2 / n as f64 - mean * mean
    );
    Ok(())
}
