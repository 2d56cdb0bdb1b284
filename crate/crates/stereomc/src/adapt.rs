//! Adapting-Increasingly-Rarely control of the stereographic samplers.
//!
//! The controller runs the chosen sampler in epochs of polynomially growing
//! length t_k, holding the projection parameter gamma = (mu, Sigma) fixed
//! within each epoch. At epoch boundaries it re-estimates gamma from the
//! latest half of the epochs: empirical mean, d times the empirical
//! covariance, a median-Mahalanobis rescale that centers the latest epoch on
//! the equator, and a projection onto the compact set {|mu| <= R,
//! eigenvalues of Sigma in [r^2, R^2]}. The Euclidean endpoint x (never the
//! sphere point, whose meaning changes with gamma) is carried across the
//! boundary and re-projected under the new parameter.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Result, StereoError};
use crate::geometry::{sp_forward, sp_inverse, Precondition, EIGENVALUE_FLOOR};
use crate::sbps::{sbps_run_with, EventSummary, SbpsConfig, SbpsDiagnostics};
use crate::srw::{srw_step, SrwConfig, SrwState};
use crate::sss::{sss_step, SssState};
use crate::targets::Target;

// ---------------------------------------------------------------------------
// Epoch schedule
// ---------------------------------------------------------------------------

/// How the lag sequence t_k is generated from k and beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LagRule {
    /// t_k = max(1, round(c * k^beta)).
    Poly { c: f64 },
    /// t_k = smallest power of two >= k^beta, so that lags far enough out
    /// share increasingly large common divisors.
    Pow2,
}

/// The AIR lag sequence t_k and adaptation times T_k = t_1 + ... + t_k.
#[derive(Debug, Clone, Copy)]
pub struct EpochSchedule {
    pub beta: f64,
    pub rule: LagRule,
}

impl EpochSchedule {
    pub fn new(beta: f64, rule: LagRule) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(StereoError::InvalidConfig(format!("beta must be > 0, got {beta}")));
        }
        if let LagRule::Poly { c } = rule {
            if !(c >= 1.0) {
                return Err(StereoError::InvalidConfig(format!("poly lag c must be >= 1, got {c}")));
            }
        }
        Ok(Self { beta, rule })
    }

    /// Lag t_k for k >= 1 (t_0 = 0 by convention).
    pub fn lag(&self, k: usize) -> u64 {
        if k == 0 {
            return 0;
        }
        let p = (k as f64).powf(self.beta);
        match self.rule {
            LagRule::Poly { c } => (c * p).round().max(1.0) as u64,
            LagRule::Pow2 => {
                let mut t = 1u64;
                while (t as f64) < p {
                    t *= 2;
                }
                t
            }
        }
    }

    /// Adaptation time T_k.
    pub fn adaptation_time(&self, k: usize) -> u64 {
        (1..=k).map(|i| self.lag(i)).sum()
    }

    /// Smallest epoch count whose total length covers `total` units.
    pub fn epochs_to_cover(&self, total: u64) -> usize {
        let mut k = 0;
        let mut sum = 0;
        while sum < total {
            k += 1;
            sum += self.lag(k);
        }
        k
    }
}

// ---------------------------------------------------------------------------
// Compact parameter set
// ---------------------------------------------------------------------------

/// The compact set Gamma_{r,R}: |mu| <= R, eigenvalues of Sigma in
/// [r^2, R^2], and (when adapted) h and lambda_ref in [r, R].
#[derive(Debug, Clone, Copy)]
pub struct ParamBounds {
    pub r: f64,
    pub big_r: f64,
}

impl ParamBounds {
    pub fn new(r: f64, big_r: f64) -> Result<Self> {
        if !(r > 0.0 && big_r > r) {
            return Err(StereoError::InvalidConfig(format!(
                "bounds need 0 < r < R, got r={r}, R={big_r}"
            )));
        }
        Ok(Self { r, big_r })
    }

    pub fn contains(&self, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> bool {
        if mu.norm() > self.big_r * (1.0 + 1e-12) {
            return false;
        }
        let eigs = sigma.clone().symmetric_eigen().eigenvalues;
        eigs.iter().all(|&l| {
            l >= self.r * self.r * (1.0 - 1e-12) && l <= self.big_r * self.big_r * (1.0 + 1e-12)
        })
    }
}

/// Projects (mu, Sigma) onto Gamma_{r,R}: mu is radially clipped to norm R,
/// Sigma's eigenvalues are clamped into [r^2, R^2] with eigenvectors kept.
pub fn project_to_bounds(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    bounds: &ParamBounds,
) -> (DVector<f64>, DMatrix<f64>) {
    let mu_norm = mu.norm();
    let mu_out = if mu_norm > bounds.big_r {
        mu * (bounds.big_r / mu_norm)
    } else {
        mu.clone()
    };
    let eig = sigma.clone().symmetric_eigen();
    let clamped = eig
        .eigenvalues
        .map(|l| l.clamp(bounds.r * bounds.r, bounds.big_r * bounds.big_r));
    let q = &eig.eigenvectors;
    let sigma_out = q * DMatrix::from_diagonal(&clamped) * q.transpose();
    // exact symmetry for downstream constructors
    let sigma_out = DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |i, j| {
        0.5 * (sigma_out[(i, j)] + sigma_out[(j, i)])
    });
    (mu_out, sigma_out)
}

// ---------------------------------------------------------------------------
// Epoch buffer and estimators
// ---------------------------------------------------------------------------

/// Per-epoch sample paths (Euclidean points), oldest first.
#[derive(Debug, Clone, Default)]
pub struct EpochBuffer {
    epochs: Vec<Vec<DVector<f64>>>,
}

impl EpochBuffer {
    pub fn push_epoch(&mut self, samples: Vec<DVector<f64>>) {
        self.epochs.push(samples);
    }

    pub fn n_epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn total_samples(&self) -> usize {
        self.epochs.iter().map(|e| e.len()).sum()
    }

    /// The latest ceil(k/2) epochs (at least one).
    pub fn estimation_window(&self) -> &[Vec<DVector<f64>>] {
        let k = self.epochs.len();
        let keep = k.div_ceil(2).max(1).min(k);
        &self.epochs[k - keep..]
    }

    pub fn latest_epoch(&self) -> Option<&[DVector<f64>]> {
        self.epochs.last().map(|e| e.as_slice())
    }
}

/// Rescales sigma_hat by the median squared Mahalanobis norm of the latest
/// epoch, so that the epoch's median latitude under the new parameter is 0.
/// The median (not the mean) keeps the factor finite when the target
/// covariance is not.
pub fn equator_rescale(
    mu_hat: &DVector<f64>,
    sigma_hat: &DMatrix<f64>,
    latest_epoch: &[DVector<f64>],
) -> DMatrix<f64> {
    assert!(!latest_epoch.is_empty(), "equator_rescale needs a non-empty epoch");
    let eig = sigma_hat.clone().symmetric_eigen();
    let inv_root = eig.eigenvalues.map(|l| 1.0 / l.max(EIGENVALUE_FLOOR).sqrt());
    let q = &eig.eigenvectors;
    let w = q * DMatrix::from_diagonal(&inv_root) * q.transpose();
    let mut norms: Vec<f64> = latest_epoch
        .iter()
        .map(|x| (&w * (x - mu_hat)).norm_squared())
        .collect();
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = norms.len();
    let m = if n % 2 == 1 {
        norms[n / 2]
    } else {
        0.5 * (norms[n / 2 - 1] + norms[n / 2])
    };
    let m = m.max(1e-12);
    sigma_hat * m
}

/// Empirical (mu, Sigma) from the buffer: pooled mean and d * covariance
/// over the latest half of the epochs, equator-rescaled on the latest epoch,
/// plus a relative ridge. Returns `None` (keep the previous parameters) when
/// fewer than d + 2 samples are available.
pub fn estimate_parameters(buffer: &EpochBuffer, d: usize) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let window = buffer.estimation_window();
    let n: usize = window.iter().map(|e| e.len()).sum();
    if n < d + 2 {
        return None;
    }
    let nf = n as f64;
    let mut mu = DVector::zeros(d);
    for epoch in window {
        for x in epoch {
            mu += x;
        }
    }
    mu /= nf;
    let mut cov = DMatrix::zeros(d, d);
    for epoch in window {
        for x in epoch {
            let delta = x - &mu;
            cov.syger(1.0 / nf, &delta, &delta, 1.0);
        }
    }
    // syger fills the lower triangle; mirror it
    for i in 0..d {
        for j in (i + 1)..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    let sigma = cov * d as f64;
    let latest = buffer.latest_epoch().expect("window non-empty");
    let mut sigma = equator_rescale(&mu, &sigma, latest);
    let ridge = 1e-8 * sigma.trace() / d as f64;
    for i in 0..d {
        sigma[(i, i)] += ridge;
    }
    Some((mu, sigma))
}

// ---------------------------------------------------------------------------
// Controller
// ---------------------------------------------------------------------------

/// Which sampler the controller drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Srw,
    Sss,
    Sbps,
}

/// Controller configuration.
#[derive(Debug, Clone)]
pub struct AirConfig {
    pub schedule: EpochSchedule,
    pub bounds: ParamBounds,
    pub n_epochs: usize,
    /// When false the estimator is bypassed and gamma stays at gamma_0; the
    /// run is then step-for-step identical to the plain sampler (for the SRW
    /// and SSS, whose state carries across boundaries unchanged).
    pub adapt: bool,
    /// Optional 0.234-acceptance targeting of the SRW scale h. Off in every
    /// reference configuration.
    pub adapt_h: bool,
    pub srw: SrwConfig,
    pub sbps: SbpsConfig,
}

/// Parameters in force during one epoch.
#[derive(Debug, Clone)]
pub struct ParamRecord {
    /// Epoch index this parameter governed; the last record is the final
    /// post-run update.
    pub epoch: usize,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub h: f64,
    pub lambda_ref: f64,
}

impl ParamRecord {
    pub fn sigma_eigenvalues(&self) -> DVector<f64> {
        self.sigma.clone().symmetric_eigen().eigenvalues
    }
}

/// Everything one epoch produced.
#[derive(Debug, Clone)]
pub struct EpochReport {
    pub epoch: usize,
    pub length: u64,
    /// Euclidean samples: one per step (SRW/SSS) or one per skeleton point
    /// (SBPS).
    pub samples: Vec<DVector<f64>>,
    pub latitudes: Vec<f64>,
    pub accepted: u64,
    pub pole_rejects: u64,
    pub shrink_iterations: u64,
    pub sbps: Option<SbpsDiagnostics>,
    /// Per-event rows (SBPS epochs only), local times within the epoch.
    pub events: Vec<EventSummary>,
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct AirResult {
    pub epochs: Vec<EpochReport>,
    pub params: Vec<ParamRecord>,
    pub final_x: DVector<f64>,
}

/// Runs the AIR controller for `cfg.n_epochs` epochs starting from the
/// Euclidean point `x0` and parameters `(mu0, sigma0)` (projected onto the
/// bounds before use).
pub fn air_run<R: Rng + ?Sized>(
    kind: SamplerKind,
    target: &dyn Target,
    x0: &DVector<f64>,
    mu0: &DVector<f64>,
    sigma0: &DMatrix<f64>,
    cfg: &AirConfig,
    rng: &mut R,
) -> Result<AirResult> {
    let d = target.dim();
    if x0.len() != d || mu0.len() != d {
        return Err(StereoError::DimensionMismatch { expected: d, got: x0.len() });
    }
    let (mut mu, mut sigma) = project_to_bounds(mu0, sigma0, &cfg.bounds);
    let mut h = cfg.srw.h;
    let lambda_ref = cfg.sbps.lambda_ref;
    let mut x = x0.clone();
    let mut buffer = EpochBuffer::default();
    let mut epochs = Vec::with_capacity(cfg.n_epochs);
    let mut params = Vec::with_capacity(cfg.n_epochs + 1);
    // when gamma is unchanged across a boundary the discrete samplers keep
    // their sphere state; re-projecting from x is only required (and only
    // meaningful) after a parameter change
    enum Carry {
        Fresh,
        Srw(SrwState),
        Sss(SssState),
    }
    let mut carry = Carry::Fresh;

    for k in 0..cfg.n_epochs {
        params.push(ParamRecord {
            epoch: k,
            mu: mu.clone(),
            sigma: sigma.clone(),
            h,
            lambda_ref,
        });
        let p = Precondition::new(mu.clone(), sigma.clone())?;
        let length = cfg.schedule.lag(k + 1);
        let start = Instant::now();
        let mut report = EpochReport {
            epoch: k,
            length,
            samples: Vec::new(),
            latitudes: Vec::new(),
            accepted: 0,
            pole_rejects: 0,
            shrink_iterations: 0,
            sbps: None,
            events: Vec::new(),
            wall: Duration::ZERO,
        };
        match kind {
            SamplerKind::Srw => {
                let srw_cfg = SrwConfig { h };
                let mut state = match carry {
                    Carry::Srw(s) => s,
                    _ => SrwState::from_x(&p, target, &x)?,
                };
                report.samples.reserve(length as usize);
                for _ in 0..length {
                    let step = srw_step(&mut state, &srw_cfg, &p, target, rng)?;
                    report.accepted += step.accepted as u64;
                    report.pole_rejects += step.pole_rejected as u64;
                    report.samples.push(state.x.clone());
                    report.latitudes.push(state.z.latitude());
                }
                x = state.x.clone();
                carry = Carry::Srw(state);
            }
            SamplerKind::Sss => {
                let mut state = match carry {
                    Carry::Sss(s) => s,
                    _ => SssState::from_x(&p, target, &x)?,
                };
                report.samples.reserve(length as usize);
                for _ in 0..length {
                    report.shrink_iterations += sss_step(&mut state, &p, target, rng)?;
                    report.samples.push(state.x.clone());
                    report.latitudes.push(state.z.latitude());
                }
                x = state.x.clone();
                carry = Carry::Sss(state);
            }
            SamplerKind::Sbps => {
                let z = sp_inverse(&p, &x)?;
                let v = crate::geometry::sample_tangent_uniform(&z, rng);
                let phase = crate::geometry::PhasePoint::new(z, v)?;
                let run =
                    sbps_run_with(phase, length as f64, &cfg.sbps, &p, target, rng, false)?;
                report.samples = run.skeleton.xs;
                report.latitudes = run.skeleton.latitudes;
                report.sbps = Some(run.diagnostics);
                report.events = run.event_summaries;
                // carry the endpoint; fall back to the last skeleton sample
                // if the path ended inside the pole guard
                x = match sp_forward(&p, &run.final_phase.z) {
                    Ok(xe) => xe,
                    Err(StereoError::PoleSingularity { .. }) => report
                        .samples
                        .last()
                        .cloned()
                        .ok_or_else(|| {
                            StereoError::Numerical("SBPS epoch produced no usable endpoint".into())
                        })?,
                    Err(e) => return Err(e),
                };
            }
        }
        report.wall = start.elapsed();
        buffer.push_epoch(report.samples.clone());

        if cfg.adapt {
            if let Some((mu_hat, sigma_hat)) = estimate_parameters(&buffer, d) {
                let (mu_p, sigma_p) = project_to_bounds(&mu_hat, &sigma_hat, &cfg.bounds);
                if mu_p != mu || sigma_p != sigma {
                    carry = Carry::Fresh;
                }
                mu = mu_p;
                sigma = sigma_p;
            }
            // a changed h keeps the sphere state: only gamma moves the chart
            if cfg.adapt_h && kind == SamplerKind::Srw && length > 0 {
                let acc = report.accepted as f64 / length as f64;
                h = (h * (acc - 0.234).exp()).clamp(cfg.bounds.r, cfg.bounds.big_r);
            }
        }
        epochs.push(report);
    }
    params.push(ParamRecord {
        epoch: cfg.n_epochs,
        mu: mu.clone(),
        sigma: sigma.clone(),
        h,
        lambda_ref,
    });
    Ok(AirResult { epochs, params, final_x: x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::targets::{Affine, Gaussian};
    use rand_distr::StandardNormal;

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn poly_lags_are_theta_of_k_beta() {
        for &(beta, c) in &[(0.5, 1.0), (1.0, 2.0), (2.0, 1.0)] {
            let s = EpochSchedule::new(beta, LagRule::Poly { c }).unwrap();
            for k in 1..=2000usize {
                let t = s.lag(k) as f64;
                let p = (k as f64).powf(beta);
                // the sandwich holds with constant 2c (rounding costs up to
                // one unit at k = 1)
                assert!(t >= p / (2.0 * c) - 1e-9, "beta {beta} k {k}: {t} vs {p}");
                assert!(t <= 2.0 * c * p + 1e-9, "beta {beta} k {k}: {t} vs {p}");
            }
        }
    }

    #[test]
    fn pow2_lags_have_diverging_common_divisors() {
        for &beta in &[0.5, 1.0, 1.5] {
            let s = EpochSchedule::new(beta, LagRule::Pow2).unwrap();
            for k in 1..=1000usize {
                let t = s.lag(k);
                assert!(t.is_power_of_two());
                assert!(t as f64 >= (k as f64).powf(beta));
                assert!(t == 1 || ((t / 2) as f64) < (k as f64).powf(beta));
                // gcd over a finite horizon equals the (monotone) minimum
                let mut g = t;
                for j in k..(4 * k + 4) {
                    g = gcd(g, s.lag(j));
                }
                let floor = 2f64.powf((beta * (k as f64).log2()).floor());
                assert!(g as f64 >= floor, "k {k}: gcd {g} < {floor}");
            }
        }
    }

    #[test]
    fn adaptation_times_strictly_increase_from_zero() {
        let s = EpochSchedule::new(1.0, LagRule::Pow2).unwrap();
        assert_eq!(s.adaptation_time(0), 0);
        let mut prev = 0;
        for k in 1..50 {
            let t = s.adaptation_time(k);
            assert!(t > prev);
            prev = t;
        }
        assert_eq!(s.epochs_to_cover(1), 1);
        let k = s.epochs_to_cover(1000);
        assert!(s.adaptation_time(k) >= 1000 && s.adaptation_time(k - 1) < 1000);
    }

    #[test]
    fn projection_clips_mu_and_clamps_spectrum() {
        let bounds = ParamBounds::new(0.5, 2.0).unwrap();
        let mu = DVector::from_vec(vec![3.0, 4.0]); // norm 5 = 2.5 R
        let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![0.025, 40.0]));
        let (mu_p, sigma_p) = project_to_bounds(&mu, &sigma, &bounds);
        assert!((mu_p.norm() - 2.0).abs() < 1e-12);
        assert!((mu_p[0] / mu_p[1] - 0.75).abs() < 1e-12, "direction preserved");
        let eigs = sigma_p.symmetric_eigen().eigenvalues;
        let mut e: Vec<f64> = eigs.iter().cloned().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((e[0] - 0.25).abs() < 1e-12 && (e[1] - 4.0).abs() < 1e-12);

        // untouched inside the set
        let mu2 = DVector::from_vec(vec![0.5, 0.5]);
        let sigma2 = DMatrix::identity(2, 2);
        let (mu_q, sigma_q) = project_to_bounds(&mu2, &sigma2, &bounds);
        assert!((&mu_q - &mu2).norm() < 1e-15);
        assert!((sigma_q - &sigma2).norm() < 1e-15);
        assert!(bounds.contains(&mu_q, &sigma2));
    }

    #[test]
    fn projection_clamps_mixed_spectrum_keeping_eigenvectors() {
        let bounds = ParamBounds::new(1.0, 3.0).unwrap();
        // eigenvalues r^2/10, (R^2+r^2)/2, 10 R^2 in a rotated basis
        let mut rng = chain_rng(101, 0);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = a.qr().q();
        let eigs = DVector::from_vec(vec![0.1, 5.0, 90.0]);
        let sigma = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
        let (_, sigma_p) = project_to_bounds(&DVector::zeros(3), &sigma, &bounds);
        let clamped = [1.0, 5.0, 9.0];
        for (i, want) in clamped.iter().enumerate() {
            let v = q.column(i);
            let got = (v.transpose() * &sigma_p * v)[(0, 0)];
            assert!((got - want).abs() < 1e-9, "eigenvalue {i}: {got} vs {want}");
        }
    }

    #[test]
    fn estimator_recovers_iid_gaussian_moments() {
        let d = 5;
        let mut rng = chain_rng(102, 0);
        let mut buffer = EpochBuffer::default();
        let n = 100_000;
        let epoch: Vec<DVector<f64>> = (0..n)
            .map(|_| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        buffer.push_epoch(epoch);
        let (mu, sigma) = estimate_parameters(&buffer, d).unwrap();
        for i in 0..d {
            assert!(mu[i].abs() < 0.02, "mu[{i}] = {}", mu[i]);
        }
        // before the equator rescale sigma/d would be ~I; the rescale
        // multiplies by the median chi^2_d / d of the whitened sample, so
        // sigma/d stays within a few percent of a scalar multiple of I
        let eigs = sigma.symmetric_eigen().eigenvalues / d as f64;
        let emin = eigs.min();
        let emax = eigs.max();
        assert!(emax / emin < 1.1, "anisotropy {emin}..{emax}");
    }

    #[test]
    fn estimator_handles_degenerate_epochs() {
        let d = 3;
        let x0 = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let mut buffer = EpochBuffer::default();
        buffer.push_epoch(vec![x0.clone(); 50]);
        let (mu, sigma) = estimate_parameters(&buffer, d).unwrap();
        assert!((&mu - &x0).norm() < 1e-12);
        // zero spread: everything rides on the later bound projection
        assert!(sigma.norm() < 1e-10);
        let bounds = ParamBounds::new(0.1, 10.0).unwrap();
        let (_, sigma_p) = project_to_bounds(&mu, &sigma, &bounds);
        let eigs = sigma_p.symmetric_eigen().eigenvalues;
        assert!(eigs.iter().all(|&l| (l - 0.01).abs() < 1e-9));

        // too few samples: keep previous parameters
        let mut small = EpochBuffer::default();
        small.push_epoch(vec![x0; d]);
        assert!(estimate_parameters(&small, d).is_none());
    }

    #[test]
    fn equator_rescale_centers_the_epoch() {
        let d = 4;
        // epoch points all at squared Mahalanobis radius rho^2 under sigma
        let sigma = DMatrix::identity(d, d) * 2.0;
        let mu = DVector::zeros(d);
        let rho = 3.0f64;
        let mut rng = chain_rng(103, 0);
        let epoch: Vec<DVector<f64>> = (0..101)
            .map(|_| {
                let mut v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                v *= rho * 2.0f64.sqrt() / v.norm(); // |sigma^{-1/2} x| = rho
                v
            })
            .collect();
        let scaled = equator_rescale(&mu, &sigma, &epoch);
        assert!((scaled.clone() / (rho * rho) - &sigma).norm() < 1e-9);
        // median latitude under the rescaled parameter is 0
        let p = Precondition::new(mu.clone(), scaled).unwrap();
        let mut lats: Vec<f64> = epoch.iter().map(|x| sp_inverse(&p, x).unwrap().latitude()).collect();
        lats.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(lats[50].abs() < 1e-12, "median latitude {}", lats[50]);

        // identity when the epoch is already centered
        let centered: Vec<DVector<f64>> = epoch
            .iter()
            .map(|x| x / rho)
            .collect();
        let unscaled = equator_rescale(&mu, &sigma, &centered);
        assert!((unscaled - &sigma).norm() < 1e-9);
    }

    #[test]
    fn equator_rescale_is_stable_under_subsampling_on_heavy_tails() {
        // t_2-like draws: Gaussian / sqrt(Gamma(1,1)) has very heavy tails
        let d = 3;
        let mut rng = chain_rng(104, 0);
        let mut epoch = Vec::new();
        for _ in 0..2000 {
            let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let u: f64 = rng.gen::<f64>().max(1e-12);
            epoch.push(g / u); // pareto-ish radial blowup
        }
        let mu = DVector::zeros(d);
        let sigma = DMatrix::identity(d, d);
        let full = equator_rescale(&mu, &sigma, &epoch);
        // drop 10% of the points
        let sub: Vec<DVector<f64>> = epoch.iter().take(1800).cloned().collect();
        let subbed = equator_rescale(&mu, &sigma, &sub);
        let ratio = full[(0, 0)] / subbed[(0, 0)];
        assert!(ratio.is_finite() && ratio > 0.8 && ratio < 1.25, "ratio {ratio}");
    }

    #[test]
    fn disabled_adaptation_reproduces_the_plain_sampler() {
        let d = 3;
        let target = Gaussian::standard(d);
        let schedule = EpochSchedule::new(1.0, LagRule::Pow2).unwrap();
        let bounds = ParamBounds::new(1e-3, 1e3).unwrap();
        let cfg = AirConfig {
            schedule,
            bounds,
            n_epochs: 6,
            adapt: false,
            adapt_h: false,
            srw: SrwConfig::new(0.5).unwrap(),
            sbps: SbpsConfig::default(),
        };
        let x0 = DVector::from_element(d, 0.7);
        let mu0 = DVector::zeros(d);
        let sigma0 = DMatrix::identity(d, d) * d as f64;

        let mut rng = chain_rng(105, 0);
        let air = air_run(SamplerKind::Srw, &target, &x0, &mu0, &sigma0, &cfg, &mut rng).unwrap();

        // manual run with the same stream and fixed parameters
        let p = Precondition::new(mu0, sigma0).unwrap();
        let mut rng2 = chain_rng(105, 0);
        let mut state = SrwState::from_x(&p, &target, &x0).unwrap();
        let total: u64 = (1..=6).map(|k| schedule.lag(k)).sum();
        let mut manual = Vec::new();
        for _ in 0..total {
            srw_step(&mut state, &cfg.srw, &p, &target, &mut rng2).unwrap();
            manual.push(state.x.clone());
        }
        let flattened: Vec<&DVector<f64>> =
            air.epochs.iter().flat_map(|e| e.samples.iter()).collect();
        assert_eq!(flattened.len(), manual.len());
        for (a, b) in flattened.iter().zip(&manual) {
            assert_eq!(a.as_slice(), b.as_slice(), "trace diverged");
        }
        // parameters never moved
        for rec in &air.params {
            assert!((&rec.mu - air.params[0].mu.clone()).norm() == 0.0);
        }
    }

    #[test]
    fn gaussian_target_parameters_converge_toward_known_optimum() {
        // N(m, C) with known m, C: the history approaches (m, s * d * C)
        let d = 4;
        let m = DVector::from_vec(vec![2.0, -1.0, 0.5, 1.5]);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 0.7, 0.5]));
        let target = Affine::new(Gaussian::standard(d), a.clone(), m.clone()).unwrap();
        let schedule = EpochSchedule::new(1.0, LagRule::Poly { c: 60.0 }).unwrap();
        let bounds = ParamBounds::new(1e-2, 1e3).unwrap();
        let cfg = AirConfig {
            schedule,
            bounds,
            n_epochs: 10,
            adapt: true,
            adapt_h: false,
            srw: SrwConfig::new(0.5).unwrap(),
            sbps: SbpsConfig::default(),
        };
        let mut rng = chain_rng(106, 0);
        let air = air_run(
            SamplerKind::Sss,
            &target,
            &DVector::zeros(d),
            &DVector::zeros(d),
            &DMatrix::identity(d, d),
            &cfg,
            &mut rng,
        )
        .unwrap();
        let first_err = (&air.params[0].mu - &m).norm();
        let last = air.params.last().unwrap();
        let last_err = (&last.mu - &m).norm();
        assert!(last_err < 0.2, "final |mu - m| = {last_err}");
        assert!(last_err < first_err / 4.0);
        // sigma is a positive scalar multiple of d*C = d*A*A^T, up to noise:
        // compare shape via the largest/smallest relative eigenvalue of
        // C^{-1/2} Sigma C^{-1/2}
        let c = &a * a.transpose();
        let c_inv_root = {
            let eig = c.clone().symmetric_eigen();
            let inv = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
        };
        let shape = &c_inv_root * &last.sigma * &c_inv_root;
        let eigs = shape.symmetric_eigen().eigenvalues;
        assert!(eigs.max() / eigs.min() < 1.6, "shape mismatch: {eigs:?}");
        // every recorded parameter respects the bounds
        for rec in &air.params {
            assert!(cfg.bounds.contains(&rec.mu, &rec.sigma), "epoch {}", rec.epoch);
        }
    }
}
