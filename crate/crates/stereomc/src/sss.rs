//! The Stereographic Slice Sampler: geodesic slice sampling of pi_gamma with
//! the shrinkage procedure.
//!
//! Each step draws a log-level `t = log pi_gamma(z) + log U`, a uniform
//! tangent direction v, and then samples an angle on the great circle
//! `z cos(theta) + v sin(theta)` from the superlevel set by shrinkage: start
//! with theta ~ U(0, 2pi) on the signed interval (theta - 2pi, theta], and on
//! every rejection move the boundary with theta's sign to theta, so the
//! interval contracts around the current point at angle 0.
//!
//! The slice level is only ever handled in log space; pi_gamma itself
//! underflows already at moderate dimension for the targets of interest.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Result, StereoError};
use crate::geometry::{
    geodesic, log_pi_gamma, sample_tangent_uniform, sp_forward, sp_inverse, Precondition,
    SpherePoint, POLE_GUARD,
};
use crate::targets::Target;

/// Iteration cap for the shrinkage loop. Unreachable for continuous
/// densities (the interval contracts to the current point, which lies
/// strictly above the level), kept as a tripwire for pathological inputs.
pub const SHRINK_ITERATION_CAP: u64 = 1_000_000;

/// Signed angle interval of the shrinkage procedure.
///
/// Invariants: `theta_min < 0 <= theta_max` after initialisation, the
/// interval length strictly decreases at every rejection, and angle 0 (the
/// current point) always stays inside.
#[derive(Debug, Clone)]
pub struct ShrinkState {
    theta: f64,
    theta_min: f64,
    theta_max: f64,
    iterations: u64,
}

impl ShrinkState {
    /// Draws the initial proposal theta ~ U(0, 2pi) and sets the interval to
    /// (theta - 2pi, theta].
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let theta = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        Self {
            theta,
            theta_min: theta - 2.0 * std::f64::consts::PI,
            theta_max: theta,
            iterations: 1,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.theta_min, self.theta_max)
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Records a rejection of the current angle: the boundary on theta's own
    /// sign side moves to theta, and a fresh angle is drawn uniformly from
    /// the shrunk interval.
    pub fn reject_and_redraw<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.theta < 0.0 {
            self.theta_min = self.theta;
        } else {
            self.theta_max = self.theta;
        }
        self.theta = self.theta_min + rng.gen::<f64>() * (self.theta_max - self.theta_min);
        self.iterations += 1;
    }
}

/// Shrinkage sampling of the superlevel set `{theta : logdens(z cos theta +
/// v sin theta) > t_log}` for an orthonormal pair (z, v).
///
/// `logdens` receives the raw point on the great circle and must return
/// `-inf` for points it cannot evaluate (e.g. inside the pole guard); such
/// angles are simply rejected and shrunk past.
pub fn shrink<R: Rng + ?Sized>(
    z: &SpherePoint,
    v: &DVector<f64>,
    t_log: f64,
    mut logdens: impl FnMut(&DVector<f64>) -> f64,
    rng: &mut R,
) -> Result<(DVector<f64>, u64)> {
    let mut state = ShrinkState::init(rng);
    loop {
        let (point, _) = geodesic(z.coords(), v, state.theta());
        if logdens(&point) > t_log {
            return Ok((point, state.iterations()));
        }
        if state.iterations() >= SHRINK_ITERATION_CAP {
            let (lo, hi) = state.bounds();
            return Err(StereoError::ShrinkageStuck {
                iterations: state.iterations(),
                level: t_log,
                theta_min: lo,
                theta_max: hi,
            });
        }
        state.reject_and_redraw(rng);
    }
}

/// Current SSS chain position with cached Euclidean image and log-density.
#[derive(Debug, Clone)]
pub struct SssState {
    pub z: SpherePoint,
    pub x: DVector<f64>,
    pub log_pi: f64,
}

impl SssState {
    pub fn from_x(p: &Precondition, target: &dyn Target, x: &DVector<f64>) -> Result<Self> {
        let z = sp_inverse(p, x)?;
        let log_pi = log_pi_gamma(p, target, &z)?;
        Ok(Self { z, x: x.clone(), log_pi })
    }
}

/// One slice-sampling transition; returns the number of shrinkage
/// iterations spent (1 = first proposal accepted).
pub fn sss_step<R: Rng + ?Sized>(
    state: &mut SssState,
    p: &Precondition,
    target: &dyn Target,
    rng: &mut R,
) -> Result<u64> {
    let u: f64 = rng.gen();
    let t_log = state.log_pi + u.ln();
    let v = sample_tangent_uniform(&state.z, rng);
    let d = p.dim() as f64;
    let logdens = |point: &DVector<f64>| {
        let lat = point[point.len() - 1];
        if 1.0 - lat < POLE_GUARD {
            return f64::NEG_INFINITY;
        }
        // inline log_pi_gamma on the raw circle point
        let w = point.rows(0, p.dim()) / (1.0 - lat);
        let x = p.sigma_half() * w + p.mu();
        target.log_density(&x) - d * (1.0 - lat).ln()
    };
    let (point, iterations) = shrink(&state.z, &v, t_log, logdens, rng)?;
    let z_new = SpherePoint::from_unnormalized(point)?;
    state.log_pi = log_pi_gamma(p, target, &z_new)?;
    state.x = sp_forward(p, &z_new)?;
    state.z = z_new;
    Ok(iterations)
}
