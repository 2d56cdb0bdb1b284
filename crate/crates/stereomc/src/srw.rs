//! The Stereographic Random Walk: a random walk Metropolis algorithm on the
//! sphere. Proposals take a Gaussian step in the tangent hyperplane at the
//! current point and renormalize back onto S^d; the Metropolis ratio is
//! applied to pi_gamma in log space.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, StereoError};
use crate::geometry::{log_pi_gamma, sp_forward, sp_inverse, Precondition, SpherePoint};
use crate::targets::Target;

/// Proposal scale for the SRW.
#[derive(Debug, Clone, Copy)]
pub struct SrwConfig {
    pub h: f64,
}

impl SrwConfig {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(StereoError::InvalidConfig(format!("srw h must be positive, got {h}")));
        }
        Ok(Self { h })
    }

    /// The scale used throughout the reference simulation study: h = 0.1 / d.
    pub fn default_for_dim(d: usize) -> Self {
        Self { h: 0.1 / d as f64 }
    }
}

/// Current chain position with its cached Euclidean image and log-density.
#[derive(Debug, Clone)]
pub struct SrwState {
    pub z: SpherePoint,
    pub x: DVector<f64>,
    pub log_pi: f64,
}

impl SrwState {
    /// Initializes the chain at the Euclidean point `x`.
    pub fn from_x(p: &Precondition, target: &dyn Target, x: &DVector<f64>) -> Result<Self> {
        let z = sp_inverse(p, x)?;
        let log_pi = log_pi_gamma(p, target, &z)?;
        Ok(Self { z, x: x.clone(), log_pi })
    }
}

/// Outcome of one SRW transition.
#[derive(Debug, Clone, Copy)]
pub struct SrwStep {
    pub accepted: bool,
    /// min(1, pi_gamma(z') / pi_gamma(z)), reported for diagnostics.
    pub accept_prob: f64,
    /// Proposal fell inside the North-pole guard and was auto-rejected.
    pub pole_rejected: bool,
}

/// Tangent-Gaussian proposal: dz ~ N(0, h^2 I_{d+1}) projected orthogonal to
/// z, then `(z + dz)` renormalized. Returned as a raw vector; the step
/// decides whether it is a legal sphere point.
pub fn srw_propose<R: Rng + ?Sized>(z: &SpherePoint, h: f64, rng: &mut R) -> DVector<f64> {
    let n = z.coords().len();
    loop {
        let mut dz = DVector::from_fn(n, |_, _| h * rng.sample::<f64, _>(StandardNormal));
        let radial = z.coords().dot(&dz);
        dz -= z.coords() * radial;
        let w = z.coords() + dz;
        let norm = w.norm();
        if norm >= 1e-12 {
            return w / norm;
        }
    }
}

/// One Metropolis transition. Proposals hitting the pole guard are rejected
/// (not resampled), preserving the kernel exactly on the guarded domain.
pub fn srw_step<R: Rng + ?Sized>(
    state: &mut SrwState,
    cfg: &SrwConfig,
    p: &Precondition,
    target: &dyn Target,
    rng: &mut R,
) -> Result<SrwStep> {
    let proposal = srw_propose(&state.z, cfg.h, rng);
    let z_new = match SpherePoint::new(proposal) {
        Ok(z) => z,
        Err(StereoError::PoleSingularity { .. }) => {
            // still consume the uniform so the accept/reject stream is
            // aligned whether or not the guard fires
            let _: f64 = rng.gen();
            return Ok(SrwStep { accepted: false, accept_prob: 0.0, pole_rejected: true });
        }
        Err(e) => return Err(e),
    };
    let log_pi_new = log_pi_gamma(p, target, &z_new)?;
    let log_ratio = log_pi_new - state.log_pi;
    let accept_prob = log_ratio.exp().min(1.0);
    let u: f64 = rng.gen();
    let accepted = u.ln() < log_ratio;
    if accepted {
        state.x = sp_forward(p, &z_new)?;
        state.z = z_new;
        state.log_pi = log_pi_new;
    }
    Ok(SrwStep { accepted, accept_prob, pole_rejected: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::stats;
    use crate::targets::{Gaussian, StudentT};

    #[test]
    fn tiny_h_keeps_the_point() {
        let mut rng = chain_rng(51, 0);
        let z = SpherePoint::south_pole(4);
        let prop = srw_propose(&z, 1e-12, &mut rng);
        assert!((prop - z.coords()).norm() < 1e-9);
    }

    #[test]
    fn proposals_are_unit_norm() {
        let mut rng = chain_rng(52, 0);
        let z = SpherePoint::south_pole(6);
        for _ in 0..10_000 {
            let prop = srw_propose(&z, 0.8, &mut rng);
            assert!((prop.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_proposal_angle_is_symmetric() {
        // d = 1 from z = (1, 0): the signed angle distribution has no skew
        let mut rng = chain_rng(53, 0);
        let z = SpherePoint::new(DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let mut angles = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let prop = srw_propose(&z, 0.7, &mut rng);
            angles.push(prop[1].atan2(prop[0]));
        }
        let s = stats::skewness(&angles);
        assert!(s.abs() < 0.05, "skewness {s}");
    }

    #[test]
    fn uniform_case_always_accepts() {
        let d = 10;
        let target = StudentT::new(d as f64, d).unwrap();
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SrwConfig::new(0.5).unwrap();
        let mut rng = chain_rng(54, 0);
        let mut state = SrwState::from_x(&p, &target, &DVector::from_element(d, 1.0)).unwrap();
        let mut accepted = 0u32;
        let n = 10_000;
        for _ in 0..n {
            let step = srw_step(&mut state, &cfg, &p, &target, &mut rng).unwrap();
            assert!((step.accept_prob - 1.0).abs() < 1e-9, "prob {}", step.accept_prob);
            accepted += step.accepted as u32;
        }
        assert_eq!(accepted, n);
    }

    #[test]
    fn uphill_proposals_always_accept() {
        let d = 3;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SrwConfig::new(0.6).unwrap();
        let mut rng = chain_rng(55, 0);
        let mut state = SrwState::from_x(&p, &target, &DVector::from_element(d, 2.0)).unwrap();
        let mut saw_certain = 0u32;
        for _ in 0..2000 {
            let step = srw_step(&mut state, &cfg, &p, &target, &mut rng).unwrap();
            if step.accept_prob >= 1.0 {
                assert!(step.accepted, "ratio >= 1 must accept");
                saw_certain += 1;
            }
        }
        assert!(saw_certain > 100, "test never exercised uphill moves");
    }

    #[test]
    fn gaussian_moments_recovered() {
        let d = 2;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SrwConfig::new(0.5).unwrap();
        let mut rng = chain_rng(56, 0);
        let mut state = SrwState::from_x(&p, &target, &DVector::zeros(d)).unwrap();
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            srw_step(&mut state, &cfg, &p, &target, &mut rng).unwrap();
            sum += state.x[0];
            sum2 += state.x[0] * state.x[0];
        }
        let mean = sum / n as f64;
        let second = sum2 / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((second - 1.0).abs() < 0.05, "second moment {second}");
    }

    #[test]
    fn acceptance_rate_non_increasing_in_h() {
        let d = 3;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let mut rates = Vec::new();
        for (i, h) in [0.01, 0.1, 1.0].into_iter().enumerate() {
            let cfg = SrwConfig::new(h).unwrap();
            let mut rng = chain_rng(57, i as u64);
            let mut state = SrwState::from_x(&p, &target, &DVector::zeros(d)).unwrap();
            let n = 20_000;
            let mut acc = 0u32;
            for _ in 0..n {
                acc += srw_step(&mut state, &cfg, &p, &target, &mut rng).unwrap().accepted as u32;
            }
            rates.push(acc as f64 / n as f64);
        }
        // 3-sigma slack on each comparison
        let slack = 3.0 * (0.25_f64 / 20_000.0).sqrt();
        assert!(rates[0] >= rates[1] - slack, "{rates:?}");
        assert!(rates[1] >= rates[2] - slack, "{rates:?}");
    }

    /// Binned invariance check on the circle: the empirical transition flow
    /// out of the stationary histogram reproduces the histogram.
    #[test]
    fn circle_kernel_preserves_binned_target() {
        let d = 1;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, 1.0).unwrap();
        let cfg = SrwConfig::new(0.8).unwrap();
        let mut rng = chain_rng(58, 0);
        let mut state = SrwState::from_x(&p, &target, &DVector::zeros(d)).unwrap();

        let bins = 64;
        let angle_of = |z: &SpherePoint| {
            let a = z.coords()[1].atan2(z.coords()[0]);
            ((a + std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * bins as f64) as usize % bins
        };
        // empirical occupation and one-step flow counts
        let n = 1_000_000;
        let mut occupation = vec![0u64; bins];
        let mut flow = vec![vec![0u64; bins]; bins];
        let mut prev = angle_of(&state.z);
        for _ in 0..n {
            srw_step(&mut state, &cfg, &p, &target, &mut rng).unwrap();
            let cur = angle_of(&state.z);
            occupation[cur] += 1;
            flow[prev][cur] += 1;
            prev = cur;
        }
        let occ: Vec<f64> = occupation.iter().map(|&c| c as f64 / n as f64).collect();
        // push the binned law through the empirical kernel
        let mut pushed = vec![0.0f64; bins];
        for i in 0..bins {
            let row_total: u64 = flow[i].iter().sum();
            if row_total == 0 {
                continue;
            }
            for j in 0..bins {
                pushed[j] += occ[i] * flow[i][j] as f64 / row_total as f64;
            }
        }
        let tv: f64 = 0.5 * occ.iter().zip(&pushed).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 0.02, "total variation {tv}");
    }

    /// Latitude histogram under the uniform-on-sphere configuration matches
    /// the exact marginal density (1 - s^2)^{d/2 - 1}.
    #[test]
    fn uniform_case_latitude_marginal() {
        let d = 6;
        let target = StudentT::new(d as f64, d).unwrap();
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SrwConfig::new(0.9).unwrap();
        let mut rng = chain_rng(59, 0);
        let mut state = SrwState::from_x(&p, &target, &DVector::from_element(d, 1.0)).unwrap();

        // thin to every 20th step so bin counts are close to independent
        let bins = 20;
        let every = 20;
        let mut counts = vec![0u64; bins];
        let n = 200_000;
        for i in 0..n {
            srw_step(&mut state, &cfg, &p, &target, &mut rng).unwrap();
            if i % every == 0 {
                let lat = state.z.latitude().clamp(-1.0, 1.0 - 1e-12);
                counts[((lat + 1.0) / 2.0 * bins as f64) as usize] += 1;
            }
        }
        let density = |s: f64| (1.0 - s * s).powf(d as f64 / 2.0 - 1.0);
        let total = stats::simpson(density, -1.0, 1.0, 4096);
        let probs: Vec<f64> = (0..bins)
            .map(|i| {
                let a = -1.0 + 2.0 * i as f64 / bins as f64;
                let b = a + 2.0 / bins as f64;
                stats::simpson(density, a, b, 256) / total
            })
            .collect();
        let r = stats::chi2_gof(&counts, &probs, 5.0);
        assert!(r.p_value > stats::DEFAULT_ALPHA, "chi2 p = {:e}", r.p_value);
    }
}
