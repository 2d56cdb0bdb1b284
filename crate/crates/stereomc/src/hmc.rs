//! A plain Hamiltonian Monte Carlo baseline: leapfrog with unit mass and a
//! Metropolis correction on the Hamiltonian error. Deliberately untuned
//! (fixed step size and step count, no trajectory adaptation); it exists as
//! the comparator for the heavy-tailed failure-mode study.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, StereoError};
use crate::targets::Target;

#[derive(Debug, Clone, Copy)]
pub struct HmcConfig {
    pub step_size: f64,
    pub n_leapfrog: usize,
}

impl HmcConfig {
    pub fn new(step_size: f64, n_leapfrog: usize) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(StereoError::InvalidConfig(format!(
                "hmc step_size must be positive, got {step_size}"
            )));
        }
        if n_leapfrog == 0 {
            return Err(StereoError::InvalidConfig("hmc n_leapfrog must be >= 1".into()));
        }
        Ok(Self { step_size, n_leapfrog })
    }
}

/// Outcome of one HMC transition.
#[derive(Debug, Clone, Copy)]
pub struct HmcStep {
    pub accepted: bool,
    /// H(start) - H(end); the acceptance probability is min(1, exp(delta_h)).
    pub delta_h: f64,
}

/// Leapfrog integration of (x, momentum) for `n` steps of size `eps` under
/// unit mass. Returns the final position and momentum.
pub fn leapfrog(
    target: &dyn Target,
    mut x: DVector<f64>,
    mut mom: DVector<f64>,
    eps: f64,
    n: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let grad = |x: &DVector<f64>| -> Result<DVector<f64>> {
        target.log_gradient(x).ok_or(StereoError::GradientUnavailable)
    };
    mom += grad(&x)? * (0.5 * eps);
    for i in 0..n {
        x += &mom * eps;
        let scale = if i + 1 == n { 0.5 * eps } else { eps };
        mom += grad(&x)? * scale;
    }
    Ok((x, mom))
}

/// One HMC transition from `x`. Non-finite Hamiltonians reject.
pub fn hmc_step<R: Rng + ?Sized>(
    x: &mut DVector<f64>,
    cfg: &HmcConfig,
    target: &dyn Target,
    rng: &mut R,
) -> Result<HmcStep> {
    let mom0 = DVector::from_fn(x.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let h0 = -target.log_density(x) + 0.5 * mom0.norm_squared();
    let (x1, mom1) = leapfrog(target, x.clone(), mom0, cfg.step_size, cfg.n_leapfrog)?;
    let h1 = -target.log_density(&x1) + 0.5 * mom1.norm_squared();
    let delta_h = h0 - h1;
    let u: f64 = rng.gen();
    let accepted = delta_h.is_finite() && u.ln() < delta_h;
    if accepted {
        *x = x1;
    }
    Ok(HmcStep { accepted, delta_h })
}
