//! The Stereographic Bouncy Particle Sampler: a continuous-time piecewise
//! deterministic Markov process on the orthonormal pairs (z, v).
//!
//! Between events the pair flows along a great circle at unit speed. Bounce
//! events arrive with inhomogeneous rate
//!
//! ```text
//! lambda(z, v) = max(0, -v . grad~_z log pi_gamma(z)),
//! ```
//!
//! and reflect v in the tangent gradient; refreshment events arrive at the
//! constant rate `lambda_ref` and redraw v uniformly on the tangent sphere.
//! Bounce times are sampled by thinning with windowed piecewise-constant
//! bounds: over each lookahead window of `tau_w` radians the rate is bounded
//! by `safety` times its maximum on an `n_grid`-point grid. Candidates where
//! the realized rate exceeds the bound are accepted and counted, so bound
//! quality is observable in [`SbpsDiagnostics`].

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Result, StereoError};
use crate::geometry::{
    flow, sample_tangent_uniform, sp_forward, tangent_gradient, PhasePoint,
    Precondition,
};
use crate::targets::Target;

/// Tangent-gradient norms below this leave the reflection undefined.
pub const GRADIENT_FLOOR: f64 = 1e-12;

/// SBPS run parameters.
#[derive(Debug, Clone, Copy)]
pub struct SbpsConfig {
    /// Refreshment rate, >= 0. Zero disables refreshments (the process is
    /// then reducible on spherically symmetric targets).
    pub lambda_ref: f64,
    /// Thinning lookahead window, in radians of geodesic time.
    pub tau_w: f64,
    /// Grid points per window used to bound the rate.
    pub n_grid: usize,
    /// Multiplier on the grid maximum, >= 1.
    pub safety: f64,
    /// Skeleton mesh, in radians of geodesic time.
    pub delta: f64,
}

impl Default for SbpsConfig {
    fn default() -> Self {
        Self { lambda_ref: 1.0, tau_w: 0.1, n_grid: 16, safety: 1.5, delta: 0.01 }
    }
}

impl SbpsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_ref >= 0.0 && self.lambda_ref.is_finite()) {
            return Err(StereoError::InvalidConfig(format!(
                "lambda_ref must be finite and >= 0, got {}",
                self.lambda_ref
            )));
        }
        if !(self.tau_w > 0.0) || !(self.delta > 0.0) {
            return Err(StereoError::InvalidConfig("tau_w and delta must be positive".into()));
        }
        if self.n_grid < 2 {
            return Err(StereoError::InvalidConfig("n_grid must be >= 2".into()));
        }
        if !(self.safety >= 1.0) {
            return Err(StereoError::InvalidConfig("safety factor must be >= 1".into()));
        }
        Ok(())
    }
}

/// Event type recorded along a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Bounce,
    Refresh,
}

/// One velocity event: the time it fired and the phase just after it.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub phase: PhasePoint,
}

/// Compact per-event row kept even when full phases are not recorded.
#[derive(Debug, Clone, Copy)]
pub struct EventSummary {
    pub time: f64,
    pub kind: EventKind,
    pub latitude: f64,
}

/// Counters exposed by a run. `violations / candidates.max(1)` is the
/// thinning bound-violation fraction.
#[derive(Debug, Clone, Copy, Default)]
pub struct SbpsDiagnostics {
    /// Thinning accept/reject evaluations.
    pub candidates: u64,
    /// Candidates whose realized rate exceeded the window bound.
    pub violations: u64,
    /// Pole-guard encounters along the flow (each triggers a refresh).
    pub pole_hits: u64,
    /// Bounces that found a vanishing gradient and fell back to a refresh.
    pub zero_gradient_refreshes: u64,
    pub bounces: u64,
    pub refreshes: u64,
    /// Max of |norm(z) - 1| and |z.v| observed at skeleton and event points,
    /// measured before any renormalization.
    pub max_orthonormality_error: f64,
}

impl SbpsDiagnostics {
    pub fn violation_fraction(&self) -> f64 {
        self.violations as f64 / self.candidates.max(1) as f64
    }
}

/// What the thinning scan resolved first.
#[derive(Debug, Clone, Copy)]
pub enum Pending {
    /// A bounce or refreshment at local time `tau`.
    Event { tau: f64, kind: EventKind },
    /// The flow enters the North-pole guard near local time `tau`.
    PoleHit { tau: f64 },
    /// No event fires before the horizon.
    None,
}

/// Bounce intensity `max(0, -v . grad~ log pi_gamma(z))` at a phase point.
pub fn bounce_rate(phase: &PhasePoint, p: &Precondition, target: &dyn Target) -> Result<f64> {
    let g = tangent_gradient(p, target, &phase.z)?;
    Ok((-phase.v.dot(&g)).max(0.0))
}

/// Reflects the velocity in the tangent gradient of log pi_gamma:
/// `v' = v - 2 (v.g / |g|^2) g`. Errors when the gradient vanishes.
pub fn reflect(phase: &PhasePoint, p: &Precondition, target: &dyn Target) -> Result<PhasePoint> {
    let g = tangent_gradient(p, target, &phase.z)?;
    let norm2 = g.norm_squared();
    if norm2.sqrt() <= GRADIENT_FLOOR {
        return Err(StereoError::ZeroGradient { norm: norm2.sqrt(), floor: GRADIENT_FLOOR });
    }
    let coef = 2.0 * phase.v.dot(&g) / norm2;
    let v = &phase.v - g * coef;
    Ok(PhasePoint::new_unchecked(phase.z.coords().clone(), v))
}

/// Samples the first event of the superposed bounce + refreshment process
/// along the geodesic flow started at `phase`, looking no further than
/// `horizon`.
pub fn next_event_time<R: Rng + ?Sized>(
    phase: &PhasePoint,
    cfg: &SbpsConfig,
    p: &Precondition,
    target: &dyn Target,
    rng: &mut R,
    diag: &mut SbpsDiagnostics,
) -> Result<Pending> {
    next_event_within(phase, cfg, p, target, f64::INFINITY, rng, diag)
}

pub fn next_event_within<R: Rng + ?Sized>(
    phase: &PhasePoint,
    cfg: &SbpsConfig,
    p: &Precondition,
    target: &dyn Target,
    horizon: f64,
    rng: &mut R,
    diag: &mut SbpsDiagnostics,
) -> Result<Pending> {
    let tau_ref = if cfg.lambda_ref > 0.0 {
        Exp::new(cfg.lambda_ref).unwrap().sample(rng)
    } else {
        f64::INFINITY
    };
    let stop = horizon.min(tau_ref);

    let rate_at = |t: f64, diag: &mut SbpsDiagnostics| -> Result<std::result::Result<f64, f64>> {
        // inner Err(t) marks a pole hit at time t
        let ph = flow(phase, t);
        match bounce_rate(&ph, p, target) {
            Ok(r) => Ok(Ok(r)),
            Err(StereoError::PoleSingularity { .. }) => {
                diag.pole_hits += 1;
                Ok(Err(t))
            }
            Err(e) => Err(e),
        }
    };

    let mut w_start = 0.0;
    while w_start < stop {
        let w_end = w_start + cfg.tau_w;
        let mut grid_max: f64 = 0.0;
        for i in 0..cfg.n_grid {
            let t = w_start + cfg.tau_w * i as f64 / (cfg.n_grid - 1) as f64;
            match rate_at(t, diag)? {
                Ok(r) => grid_max = grid_max.max(r),
                Err(t_pole) => return Ok(Pending::PoleHit { tau: t_pole.max(f64::MIN_POSITIVE) }),
            }
        }
        let bound = cfg.safety * grid_max;
        if bound > 1e-12 {
            let exp = Exp::new(bound).unwrap();
            let mut t = w_start;
            loop {
                t += exp.sample(rng);
                if t >= w_end {
                    break;
                }
                if t >= stop {
                    break;
                }
                let r = match rate_at(t, diag)? {
                    Ok(r) => r,
                    Err(t_pole) => return Ok(Pending::PoleHit { tau: t_pole }),
                };
                diag.candidates += 1;
                if r > bound {
                    diag.violations += 1;
                    return Ok(Pending::Event { tau: t, kind: EventKind::Bounce });
                }
                if rng.gen::<f64>() * bound < r {
                    return Ok(Pending::Event { tau: t, kind: EventKind::Bounce });
                }
            }
        }
        w_start = w_end;
    }
    if tau_ref <= horizon {
        Ok(Pending::Event { tau: tau_ref, kind: EventKind::Refresh })
    } else {
        Ok(Pending::None)
    }
}

/// Discrete skeleton of a run: the phase sampled every `mesh` time units.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub mesh: f64,
    pub times: Vec<f64>,
    pub xs: Vec<DVector<f64>>,
    pub latitudes: Vec<f64>,
}

impl Skeleton {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Riemann-sum approximation of the path average (1/t) * integral of f(X_s)
/// over a uniform-mesh skeleton.
pub fn path_integral_estimator(
    skeleton: &Skeleton,
    f: impl Fn(&DVector<f64>) -> f64,
) -> Result<f64> {
    if skeleton.is_empty() {
        return Err(StereoError::InvalidConfig("empty skeleton".into()));
    }
    let sum: f64 = skeleton.xs.iter().map(&f).sum();
    Ok(sum / skeleton.len() as f64)
}

/// Everything a finished run exposes.
#[derive(Debug, Clone)]
pub struct SbpsRun {
    /// Full phase-carrying event records; empty when the run was started
    /// with `record_events = false`.
    pub events: Vec<EventRecord>,
    /// Always populated, one row per event.
    pub event_summaries: Vec<EventSummary>,
    pub skeleton: Skeleton,
    pub diagnostics: SbpsDiagnostics,
    pub final_phase: PhasePoint,
}

/// Runs the sampler for `duration` time units of geodesic flow.
pub fn sbps_run<R: Rng + ?Sized>(
    phase0: PhasePoint,
    duration: f64,
    cfg: &SbpsConfig,
    p: &Precondition,
    target: &dyn Target,
    rng: &mut R,
) -> Result<SbpsRun> {
    sbps_run_with(phase0, duration, cfg, p, target, rng, true)
}

/// As [`sbps_run`]; `record_events = false` drops per-event phase storage
/// (long mis-preconditioned runs can generate millions of bounces).
pub fn sbps_run_with<R: Rng + ?Sized>(
    phase0: PhasePoint,
    duration: f64,
    cfg: &SbpsConfig,
    p: &Precondition,
    target: &dyn Target,
    rng: &mut R,
    record_events: bool,
) -> Result<SbpsRun> {
    cfg.validate()?;
    if !(duration > 0.0) {
        return Err(StereoError::InvalidConfig(format!("duration must be > 0, got {duration}")));
    }
    let mut diag = SbpsDiagnostics::default();
    let mut events = Vec::new();
    let mut event_summaries = Vec::new();
    let mut skeleton = Skeleton {
        mesh: cfg.delta,
        times: Vec::new(),
        xs: Vec::new(),
        latitudes: Vec::new(),
    };
    let mut phase = phase0;
    let mut t_global = 0.0;
    let mut skel_idx: u64 = 0;

    'run: while t_global < duration {
        let remaining = duration - t_global;
        let pending = next_event_within(&phase, cfg, p, target, remaining, rng, &mut diag)?;
        let seg_len = match pending {
            Pending::Event { tau, .. } => tau,
            Pending::PoleHit { tau } => tau,
            Pending::None => remaining,
        };

        // emit skeleton points inside this deterministic segment
        loop {
            let next_skel = skel_idx as f64 * cfg.delta;
            if next_skel >= t_global + seg_len || next_skel >= duration {
                break;
            }
            let local = next_skel - t_global;
            let sk = flow(&phase, local);
            diag.max_orthonormality_error =
                diag.max_orthonormality_error.max(sk.orthonormality_error());
            match sp_forward(p, &sk.z) {
                Ok(x) => {
                    skeleton.times.push(next_skel);
                    skeleton.latitudes.push(sk.z.latitude());
                    skeleton.xs.push(x);
                    skel_idx += 1;
                }
                Err(StereoError::PoleSingularity { .. }) => {
                    // degrade visibly: refresh the velocity here, flow back
                    // out of the guard cap, and restart the event scan
                    diag.pole_hits += 1;
                    diag.refreshes += 1;
                    let (escaped, spent) = refresh_and_escape_cap(&sk, rng)?;
                    phase = escaped;
                    t_global = next_skel + spent;
                    skel_idx += 1;
                    event_summaries.push(EventSummary {
                        time: t_global,
                        kind: EventKind::Refresh,
                        latitude: phase.z.latitude(),
                    });
                    if record_events {
                        events.push(EventRecord {
                            time: t_global,
                            kind: EventKind::Refresh,
                            phase: phase.clone(),
                        });
                    }
                    continue 'run;
                }
                Err(e) => return Err(e),
            }
        }

        match pending {
            Pending::None => {
                phase = flow(&phase, remaining);
                t_global = duration;
            }
            Pending::PoleHit { tau } => {
                let at = flow(&phase, tau);
                diag.pole_hits += 1;
                diag.refreshes += 1;
                let (escaped, spent) = refresh_and_escape_cap(&at, rng)?;
                phase = escaped;
                t_global += tau + spent;
                event_summaries.push(EventSummary {
                    time: t_global,
                    kind: EventKind::Refresh,
                    latitude: phase.z.latitude(),
                });
                if record_events {
                    events.push(EventRecord {
                        time: t_global,
                        kind: EventKind::Refresh,
                        phase: phase.clone(),
                    });
                }
            }
            Pending::Event { tau, kind } => {
                let at = flow(&phase, tau);
                diag.max_orthonormality_error =
                    diag.max_orthonormality_error.max(at.orthonormality_error());
                t_global += tau;
                let (new_phase, recorded_kind) = match kind {
                    EventKind::Refresh => {
                        let v = sample_tangent_uniform(&at.z, rng);
                        (PhasePoint::new_unchecked(at.z.coords().clone(), v), EventKind::Refresh)
                    }
                    EventKind::Bounce => match reflect(&at, p, target) {
                        Ok(ph) => (ph, EventKind::Bounce),
                        Err(StereoError::ZeroGradient { .. }) => {
                            // measure-zero corner: keep the kernel well defined
                            diag.zero_gradient_refreshes += 1;
                            let v = sample_tangent_uniform(&at.z, rng);
                            (
                                PhasePoint::new_unchecked(at.z.coords().clone(), v),
                                EventKind::Refresh,
                            )
                        }
                        Err(e) => return Err(e),
                    },
                };
                match recorded_kind {
                    EventKind::Bounce => diag.bounces += 1,
                    EventKind::Refresh => diag.refreshes += 1,
                }
                phase = new_phase.orthonormalized();
                event_summaries.push(EventSummary {
                    time: t_global,
                    kind: recorded_kind,
                    latitude: phase.z.latitude(),
                });
                if record_events {
                    events.push(EventRecord { time: t_global, kind: recorded_kind, phase: phase.clone() });
                }
            }
        }
    }

    Ok(SbpsRun { events, event_summaries, skeleton, diagnostics: diag, final_phase: phase })
}

/// Redraws the velocity at an in-cap position and flows in small steps
/// until the position leaves the North-pole guard zone, so a pole encounter
/// cannot stall the event loop at a fixed time. Returns the recovered phase
/// and the flow time spent escaping.
fn refresh_and_escape_cap<R: Rng + ?Sized>(
    at: &PhasePoint,
    rng: &mut R,
) -> Result<(PhasePoint, f64)> {
    const NUDGE: f64 = 1e-6;
    let z = at.z.coords() / at.z.coords().norm();
    let held = PhasePoint::new_unchecked(z, at.v.clone());
    let v = sample_tangent_uniform(&held.z, rng);
    let mut phase = PhasePoint::new_unchecked(held.z.coords().clone(), v);
    let mut spent = 0.0;
    for _ in 0..100_000 {
        if phase.z.latitude() < 1.0 - crate::geometry::POLE_GUARD {
            return Ok((phase.orthonormalized(), spent));
        }
        phase = flow(&phase, NUDGE);
        spent += NUDGE;
    }
    Err(StereoError::Numerical(
        "flow could not leave the North-pole guard zone".into(),
    ))
}

/// Builds a run start from a Euclidean point with a fresh tangent velocity.
pub fn phase_from_x<R: Rng + ?Sized>(
    p: &Precondition,
    x: &DVector<f64>,
    rng: &mut R,
) -> Result<PhasePoint> {
    let z = crate::geometry::sp_inverse(p, x)?;
    let v = sample_tangent_uniform(&z, rng);
    PhasePoint::new(z, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodesic, log_pi_gamma, SpherePoint};
    use crate::rng::chain_rng;
    use crate::stats;
    use crate::targets::{Gaussian, StudentT};
    use rand_distr::StandardNormal;

    fn random_phase<R: Rng>(d: usize, rng: &mut R) -> PhasePoint {
        let z = loop {
            let v = DVector::from_fn(d + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            if let Ok(z) = SpherePoint::from_unnormalized(v) {
                break z;
            }
        };
        let v = sample_tangent_uniform(&z, rng);
        PhasePoint::new(z, v).unwrap()
    }

    #[test]
    fn uniform_case_has_zero_rate() {
        let d = 6;
        let target = StudentT::new(d as f64, d).unwrap();
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let mut rng = chain_rng(71, 0);
        for _ in 0..50 {
            let ph = random_phase(d, &mut rng);
            assert!(bounce_rate(&ph, &p, &target).unwrap() < 1e-8);
        }
    }

    #[test]
    fn rate_sign_split_identity() {
        // lambda(z, v) + lambda(z, -v) = |v . grad~ log pi_gamma|
        let d = 4;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, 1.5).unwrap();
        let mut rng = chain_rng(72, 0);
        for _ in 0..50 {
            let ph = random_phase(d, &mut rng);
            let flipped = PhasePoint::new(ph.z.clone(), -&ph.v).unwrap();
            let a = bounce_rate(&ph, &p, &target).unwrap();
            let b = bounce_rate(&flipped, &p, &target).unwrap();
            let g = crate::geometry::tangent_gradient(&p, &target, &ph.z).unwrap();
            assert!((a + b - ph.v.dot(&g).abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn rate_is_zero_while_log_density_increases() {
        // along the flow, lambda = max(0, -(d/dt) log pi_gamma(z(t)))
        let d = 3;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let mut rng = chain_rng(73, 0);
        for _ in 0..40 {
            let ph = random_phase(d, &mut rng);
            let h = 1e-6;
            let lp = |t: f64| log_pi_gamma(&p, &target, &flow(&ph, t).z).unwrap();
            let slope = (lp(h) - lp(-h)) / (2.0 * h);
            let rate = bounce_rate(&ph, &p, &target).unwrap();
            if slope > 1e-6 {
                assert!(rate < 1e-8, "rate {rate} with increasing log-density");
            } else {
                assert!((rate - (-slope).max(0.0)).abs() < 1e-5 * slope.abs().max(1.0));
            }
        }
    }

    #[test]
    fn reflect_is_an_involution_preserving_orthonormality() {
        let d = 5;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, 2.0).unwrap();
        let mut rng = chain_rng(74, 0);
        for _ in 0..50 {
            let ph = random_phase(d, &mut rng);
            let r1 = reflect(&ph, &p, &target).unwrap();
            assert!((r1.v.norm() - 1.0).abs() < 1e-9);
            assert!(r1.z.coords().dot(&r1.v).abs() < 1e-9);
            let r2 = reflect(&r1, &p, &target).unwrap();
            assert!((&r2.v - &ph.v).norm() < 1e-9);
        }
    }

    #[test]
    fn post_bounce_rate_vanishes() {
        let d = 4;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, 3.0).unwrap();
        let mut rng = chain_rng(75, 0);
        let mut checked = 0;
        for _ in 0..200 {
            let ph = random_phase(d, &mut rng);
            if bounce_rate(&ph, &p, &target).unwrap() > 1e-6 {
                let after = reflect(&ph, &p, &target).unwrap();
                assert!(bounce_rate(&after, &p, &target).unwrap() < 1e-9);
                checked += 1;
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn zero_gradient_reflection_is_a_typed_error() {
        let d = 6;
        let target = StudentT::new(d as f64, d).unwrap(); // uniform pi_gamma
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let mut rng = chain_rng(76, 0);
        let ph = random_phase(d, &mut rng);
        assert!(matches!(
            reflect(&ph, &p, &target),
            Err(StereoError::ZeroGradient { .. })
        ));
    }

    #[test]
    fn uniform_case_events_are_exponential_refreshes() {
        let d = 6;
        let target = StudentT::new(d as f64, d).unwrap();
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SbpsConfig { lambda_ref: 1.0, ..Default::default() };
        let mut rng = chain_rng(77, 0);
        let ph = random_phase(d, &mut rng);
        let mut diag = SbpsDiagnostics::default();
        let mut taus = Vec::new();
        for _ in 0..10_000 {
            match next_event_time(&ph, &cfg, &p, &target, &mut rng, &mut diag).unwrap() {
                Pending::Event { tau, kind } => {
                    assert_eq!(kind, EventKind::Refresh);
                    taus.push(tau);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        let r = stats::ks_test(&taus, |t| 1.0 - (-t).exp());
        assert!(r.p_value > stats::DEFAULT_ALPHA, "KS p = {:e}", r.p_value);
    }

    #[test]
    fn large_refresh_rate_dominates() {
        let d = 3;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SbpsConfig { lambda_ref: 1000.0, ..Default::default() };
        let mut rng = chain_rng(78, 0);
        let ph = random_phase(d, &mut rng);
        let mut diag = SbpsDiagnostics::default();
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            match next_event_time(&ph, &cfg, &p, &target, &mut rng, &mut diag).unwrap() {
                Pending::Event { tau, .. } => sum += tau,
                other => panic!("unexpected {other:?}"),
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 1e-3).abs() < 0.05e-3, "mean {mean}");
    }

    #[test]
    fn first_bounce_time_matches_quadrature_cdf() {
        // 1-D Gaussian on the circle, refreshments off
        let d = 1;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, 1.0).unwrap();
        let cfg = SbpsConfig { lambda_ref: 0.0, ..Default::default() };
        let z = SpherePoint::south_pole(d);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let phase = PhasePoint::new(z, v).unwrap();

        let mut rng = chain_rng(79, 0);
        let mut diag = SbpsDiagnostics::default();
        let mut draws = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            match next_event_time(&phase, &cfg, &p, &target, &mut rng, &mut diag).unwrap() {
                Pending::Event { tau, kind } => {
                    assert_eq!(kind, EventKind::Bounce);
                    draws.push(tau);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(diag.violation_fraction() < 1e-3, "violations {}", diag.violation_fraction());

        // oracle CDF by cumulative Simpson quadrature of the rate
        let rate = |t: f64| bounce_rate(&flow(&phase, t), &p, &target).unwrap();
        let t_max = draws.iter().cloned().fold(0.0, f64::max) + 0.1;
        let steps = 80_000usize;
        let h = t_max / steps as f64;
        let mut cum = vec![0.0f64; steps + 1];
        for i in 0..steps {
            let a = i as f64 * h;
            cum[i + 1] = cum[i] + stats::simpson(rate, a, a + h, 8);
        }
        let cdf = |t: f64| {
            let idx = ((t / h) as usize).min(steps - 1);
            let frac = t / h - idx as f64;
            let lam = cum[idx] + frac * (cum[idx + 1] - cum[idx]);
            1.0 - (-lam).exp()
        };
        let r = stats::ks_test(&draws, cdf);
        assert!(r.p_value > stats::DEFAULT_ALPHA, "KS p = {:e}", r.p_value);
    }

    #[test]
    fn flow_composition_is_exact() {
        let mut rng = chain_rng(80, 0);
        let ph = random_phase(7, &mut rng);
        let (s, t) = (0.7, 1.9);
        let a = flow(&flow(&ph, s), t);
        let b = flow(&ph, s + t);
        assert!((a.z.coords() - b.z.coords()).norm() < 1e-10);
        assert!((&a.v - &b.v).norm() < 1e-10);
        let (z2, v2) = geodesic(ph.z.coords(), &ph.v, s + t);
        assert!((&z2 - b.z.coords()).norm() < 1e-15 && (&v2 - &b.v).norm() < 1e-15);
    }

    #[test]
    fn run_keeps_orthonormality_and_counts_events() {
        let d = 3;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SbpsConfig::default();
        let mut rng = chain_rng(81, 0);
        let phase = random_phase(d, &mut rng);
        let run = sbps_run(phase, 200.0, &cfg, &p, &target, &mut rng).unwrap();
        assert!(run.diagnostics.max_orthonormality_error < 1e-8);
        assert!(run.diagnostics.bounces > 0 && run.diagnostics.refreshes > 0);
        assert_eq!(
            run.events.len() as u64,
            run.diagnostics.bounces + run.diagnostics.refreshes
        );
        // event times strictly increase
        for w in run.events.windows(2) {
            assert!(w[0].time < w[1].time);
        }
        assert!(run.diagnostics.violation_fraction() < 1e-3);
        // skeleton mesh is uniform from 0
        let expected = (200.0 / cfg.delta) as usize;
        assert!((run.skeleton.times.len() as i64 - expected as i64).abs() <= 1);
        assert!((run.skeleton.times[1] - run.skeleton.times[0] - cfg.delta).abs() < 1e-12);
    }

    #[test]
    fn uniform_case_fraction_of_refreshes_is_one() {
        let d = 4;
        let target = StudentT::new(d as f64, d).unwrap();
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SbpsConfig::default();
        let mut rng = chain_rng(82, 0);
        let phase = random_phase(d, &mut rng);
        let run = sbps_run(phase, 500.0, &cfg, &p, &target, &mut rng).unwrap();
        assert_eq!(run.diagnostics.bounces, 0);
        assert!(run.diagnostics.refreshes > 300);
    }

    #[test]
    fn path_estimator_basics() {
        let d = 4;
        let target = StudentT::new(d as f64, d).unwrap();
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SbpsConfig { delta: 0.05, ..Default::default() };
        let mut rng = chain_rng(83, 0);
        let phase = random_phase(d, &mut rng);
        let run = sbps_run(phase, 2000.0, &cfg, &p, &target, &mut rng).unwrap();
        let ones = path_integral_estimator(&run.skeleton, |_| 1.0).unwrap();
        assert_eq!(ones, 1.0);
        // latitude averages to 0 under the uniform law
        let lat_mean =
            run.skeleton.latitudes.iter().sum::<f64>() / run.skeleton.len() as f64;
        assert!(lat_mean.abs() < 0.05, "latitude mean {lat_mean}");
        let empty = Skeleton { mesh: 0.1, times: vec![], xs: vec![], latitudes: vec![] };
        assert!(path_integral_estimator(&empty, |_| 1.0).is_err());
    }

    #[test]
    fn halving_the_mesh_stays_within_monte_carlo_error() {
        let d = 2;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let second_moment = |run: &SbpsRun| {
            path_integral_estimator(&run.skeleton, |x| x[0] * x[0]).unwrap()
        };
        let coarse_cfg = SbpsConfig { delta: 0.02, ..Default::default() };
        let fine_cfg = SbpsConfig { delta: 0.01, ..Default::default() };
        // same seed: identical event path, only the mesh differs
        let mut rng = chain_rng(84, 0);
        let phase = random_phase(d, &mut rng);
        let coarse = sbps_run(phase.clone(), 2000.0, &coarse_cfg, &p, &target, &mut chain_rng(85, 0)).unwrap();
        let fine = sbps_run(phase, 2000.0, &fine_cfg, &p, &target, &mut chain_rng(85, 0)).unwrap();
        let mc_se = (2.0f64 / 2000.0).sqrt(); // Var(x^2) = 2, O(1) mixing time
        assert!(
            (second_moment(&coarse) - second_moment(&fine)).abs() < mc_se,
            "coarse {} fine {}",
            second_moment(&coarse),
            second_moment(&fine)
        );
    }

    #[test]
    fn gaussian_time_averages_recover_moments() {
        let d = 2;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, d as f64).unwrap();
        let cfg = SbpsConfig { delta: 0.05, ..Default::default() };
        let mut rng = chain_rng(86, 0);
        let phase = random_phase(d, &mut rng);
        let run = sbps_run(phase, 10_000.0, &cfg, &p, &target, &mut rng).unwrap();
        let mean = path_integral_estimator(&run.skeleton, |x| x[0]).unwrap();
        let second = path_integral_estimator(&run.skeleton, |x| x[0] * x[0]).unwrap();
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((second - 1.0).abs() < 0.05, "second {second}");
    }

    #[test]
    fn refreshments_are_required_for_latitude_irreducibility() {
        // spherically symmetric target: bounces flip v_{d+1}, so the latitude
        // amplitude sqrt(z_lat^2 + v_lat^2) is invariant without refreshments
        let d = 3;
        let target = Gaussian::standard(d);
        let p = Precondition::isotropic(d, d as f64).unwrap();
        // start with latitude amplitude 0.5
        let z = SpherePoint::new(DVector::from_vec(vec![
            (1.0f64 - 0.09).sqrt(),
            0.0,
            0.0,
            0.3,
        ]))
        .unwrap();
        let mut v = DVector::zeros(d + 1);
        v[1] = (1.0f64 - 0.16).sqrt();
        v[3] = 0.4;
        // make v tangent exactly
        let radial = z.coords().dot(&v);
        v -= z.coords() * radial;
        v /= v.norm();
        let amp0 = (z.latitude().powi(2) + v[3].powi(2)).sqrt();
        let phase = PhasePoint::new(z, v).unwrap();

        let frozen = SbpsConfig { lambda_ref: 0.0, delta: 0.05, ..Default::default() };
        let run0 = sbps_run(phase.clone(), 1000.0, &frozen, &p, &target, &mut chain_rng(87, 0)).unwrap();
        let max0 = run0.skeleton.latitudes.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(max0 <= amp0 + 1e-6, "confined run escaped: {max0} vs {amp0}");

        let mixed = SbpsConfig { lambda_ref: 1.0, delta: 0.05, ..Default::default() };
        let run1 = sbps_run(phase, 1000.0, &mixed, &p, &target, &mut chain_rng(88, 0)).unwrap();
        let max1 = run1.skeleton.latitudes.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(max1 > amp0 + 0.1, "refreshed run stayed confined: {max1}");
    }
}
