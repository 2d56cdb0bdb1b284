//! The stereographic bouncy particle sampler as a continuous-time process:
//! event mix, skeleton estimators, thinning diagnostics, and why
//! refreshments are required for irreducibility.
//!
//! ```bash
//! cargo run --release --example bouncy_particle
//! ```

use nalgebra::DVector;
use stereomc::geometry::{sample_tangent_uniform, sp_inverse, PhasePoint, Precondition};
use stereomc::rng::chain_rng;
use stereomc::sbps::{path_integral_estimator, sbps_run, SbpsConfig};
use stereomc::targets::Gaussian;

fn main() -> stereomc::Result<()> {
    let d = 3;
    let target = Gaussian::standard(d);
    let p = Precondition::isotropic(d, d as f64)?;
    let mut rng = chain_rng(5, 0);

    let z = sp_inverse(&p, &DVector::zeros(d))?;
    let v = sample_tangent_uniform(&z, &mut rng);
    let phase = PhasePoint::new(z, v)?;

    println!("-- duration-5000 run on N(0, I_3), lambda_ref = 1 --");
    let cfg = SbpsConfig { delta: 0.05, ..Default::default() };
    let run = sbps_run(phase.clone(), 5000.0, &cfg, &p, &target, &mut rng)?;
    let diag = &run.diagnostics;
    println!(
        "events: {} bounces, {} refreshes ({} pole hits, {} zero-gradient fallbacks)",
        diag.bounces, diag.refreshes, diag.pole_hits, diag.zero_gradient_refreshes
    );
    println!(
        "thinning: {} candidates, violation fraction {:.2e}",
        diag.candidates,
        diag.violation_fraction()
    );
    println!("max orthonormality drift along the path: {:.2e}", diag.max_orthonormality_error);
    let mean = path_integral_estimator(&run.skeleton, |x| x[0])?;
    let second = path_integral_estimator(&run.skeleton, |x| x[0] * x[0])?;
    println!("skeleton estimators: mean {mean:+.4}, second moment {second:.4}");

    println!("\n-- irreducibility needs refreshments --");
    // spherically symmetric target: a bounce flips the velocity's latitude
    // component, so sqrt(z_lat^2 + v_lat^2) is conserved between refreshes;
    // start the band well away from the poles to make it visible
    use stereomc::geometry::SpherePoint;
    let z = SpherePoint::new(DVector::from_vec(vec![(1.0f64 - 0.09).sqrt(), 0.0, 0.0, 0.3]))?;
    let mut v = DVector::zeros(d + 1);
    v[1] = 0.6;
    v[3] = 0.4;
    let radial = z.coords().dot(&v);
    v -= z.coords() * radial;
    v /= v.norm();
    let amp0 = (z.latitude().powi(2) + v[3].powi(2)).sqrt();
    let banded = PhasePoint::new(z, v)?;

    let frozen = SbpsConfig { lambda_ref: 0.0, delta: 0.05, ..Default::default() };
    let confined = sbps_run(banded.clone(), 1000.0, &frozen, &p, &target, &mut chain_rng(6, 0))?;
    let max_confined = confined
        .skeleton
        .latitudes
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let free = sbps_run(banded, 1000.0, &cfg, &p, &target, &mut chain_rng(6, 1))?;
    let max_free = free.skeleton.latitudes.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    println!("initial latitude amplitude: {amp0:.4}");
    println!("max |latitude|, lambda_ref = 0: {max_confined:.4} (confined to the band)");
    println!("max |latitude|, lambda_ref = 1: {max_free:.4} (explores the whole sphere)");
    Ok(())
}
