//! Named verification suites behind `stereomc verify <suite>`: property and
//! statistical checks with pinned seeds, each printing one line per check.
//! Statistical checks that fail are retried on two fresh seeds and only
//! classified broken when all three fail.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::adapt::{air_run, AirConfig, EpochSchedule, LagRule, ParamBounds, SamplerKind};
use crate::diagnostics::{self, clt_from_traces, CheckVerdict};
use crate::geometry::{
    flow, log_pi_gamma, sample_tangent_uniform, sp_forward, sp_inverse,
    tangent_gradient, PhasePoint, Precondition, SpherePoint,
};
use crate::harness::par::parallel_map;
use crate::rng::chain_rng;
use crate::sbps::{
    bounce_rate, next_event_time, reflect, sbps_run, EventKind, Pending, SbpsConfig,
    SbpsDiagnostics,
};
use crate::splitchain::{
    extract_minorisation, random_doeblin_chain, stationary_distribution, verify_atom_independence,
    verify_renewal_stationarity, verify_return_times, FiniteKernel, SplitChain,
};
use crate::srw::{srw_step, SrwConfig, SrwState};
use crate::stats::{self, DEFAULT_ALPHA};
use crate::targets::{Gaussian, StudentT};

/// One verification line.
#[derive(Debug)]
pub struct CheckLine {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

/// A named suite of checks.
#[derive(Debug)]
pub struct SuiteReport {
    pub name: &'static str,
    pub lines: Vec<CheckLine>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self { name, lines: Vec::new() }
    }

    fn check(&mut self, label: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.lines.push(CheckLine { label: label.into(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!("suite {}\n", self.name);
        for l in &self.lines {
            out.push_str(&format!(
                "  [{}] {} ({})\n",
                if l.passed { "PASS" } else { "FAIL" },
                l.label,
                l.detail
            ));
        }
        out.push_str(&format!(
            "  {}: {}\n",
            self.name,
            if self.passed() { "all checks passed" } else { "FAILURES PRESENT" }
        ));
        out
    }
}

pub fn run_suite(name: &str, seed: u64) -> Option<SuiteReport> {
    match name {
        "geometry" => Some(geometry_suite(seed)),
        "splitchain" => Some(splitchain_suite(seed)),
        "sbps-thinning" => Some(sbps_thinning_suite(seed)),
        "clt" => Some(clt_suite(seed)),
        _ => None,
    }
}

pub const SUITES: &[&str] = &["geometry", "splitchain", "sbps-thinning", "clt"];

// ---------------------------------------------------------------------------
// geometry
// ---------------------------------------------------------------------------

fn random_sphere_point<R: Rng>(d: usize, rng: &mut R) -> SpherePoint {
    loop {
        let v = DVector::from_fn(d + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(z) = SpherePoint::from_unnormalized(v) {
            return z;
        }
    }
}

/// Round-trip bijection, tangent-gradient finite differences, geodesic
/// orthonormality and the latitude identity, for d in {1, 2, 10, 200}.
pub fn geometry_suite(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("geometry");
    for &d in &[1usize, 2, 10, 200] {
        let mut rng = chain_rng(seed, d as u64);
        let diag = DVector::from_fn(d, |i, _| {
            d as f64 * (0.5 + 1.5 * i as f64 / d.max(2) as f64)
        });
        let mu = DVector::from_element(d, 0.3);
        let p = Precondition::new(mu, DMatrix::from_diagonal(&diag)).unwrap();

        // plane -> sphere -> plane
        let mut worst_x = 0.0f64;
        for _ in 0..1000 {
            let x = DVector::from_fn(d, |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
            let back = sp_forward(&p, &sp_inverse(&p, &x).unwrap()).unwrap();
            worst_x = worst_x.max((&back - &x).norm() / x.norm().max(1.0));
        }
        // sphere -> plane -> sphere
        let mut worst_z = 0.0f64;
        for _ in 0..1000 {
            let z = random_sphere_point(d, &mut rng);
            let back = sp_inverse(&p, &sp_forward(&p, &z).unwrap()).unwrap();
            worst_z = worst_z.max((back.coords() - z.coords()).norm());
        }
        report.check(
            format!("d={d} round-trip bijection"),
            worst_x < 1e-10 && worst_z < 1e-10,
            format!("max rel err {worst_x:.2e} / {worst_z:.2e}"),
        );

        // finite-difference tangent gradient on a Gaussian target
        let target = Gaussian::standard(d);
        let mut worst_fd = 0.0f64;
        for _ in 0..3 {
            let z = random_sphere_point(d, &mut rng);
            let g = tangent_gradient(&p, &target, &z).unwrap();
            for _ in 0..5 {
                let w = sample_tangent_uniform(&z, &mut rng);
                let h = 1e-6;
                let zp = SpherePoint::from_unnormalized(z.coords() + &w * h).unwrap();
                let zm = SpherePoint::from_unnormalized(z.coords() - &w * h).unwrap();
                let fd = (log_pi_gamma(&p, &target, &zp).unwrap()
                    - log_pi_gamma(&p, &target, &zm).unwrap())
                    / (2.0 * h);
                let an = w.dot(&g);
                worst_fd = worst_fd.max((fd - an).abs() / an.abs().max(1.0));
            }
        }
        report.check(
            format!("d={d} tangent gradient vs finite differences"),
            worst_fd < 1e-4,
            format!("max rel err {worst_fd:.2e}"),
        );

        // geodesic flow composed 10^4 times
        let z = random_sphere_point(d, &mut rng);
        let v = sample_tangent_uniform(&z, &mut rng);
        let mut phase = PhasePoint::new(z, v).unwrap();
        for _ in 0..10_000 {
            phase = flow(&phase, 0.173);
        }
        let drift = phase.orthonormality_error();
        report.check(
            format!("d={d} geodesic orthonormality after 1e4 steps"),
            drift < 1e-10,
            format!("drift {drift:.2e}"),
        );

        // latitude identity for gamma = (0, d I)
        let iso = Precondition::isotropic(d, d as f64).unwrap();
        let mut worst_lat = 0.0f64;
        for _ in 0..200 {
            let x = DVector::from_fn(d, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
            let z = sp_inverse(&iso, &x).unwrap();
            let q = x.norm_squared() / d as f64;
            worst_lat = worst_lat.max((z.latitude() - (q - 1.0) / (q + 1.0)).abs());
        }
        report.check(
            format!("d={d} latitude identity at Sigma = dI"),
            worst_lat < 1e-12,
            format!("max err {worst_lat:.2e}"),
        );
    }
    report
}

// ---------------------------------------------------------------------------
// splitchain
// ---------------------------------------------------------------------------

pub fn splitchain_suite(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("splitchain");

    let two_state = FiniteKernel::new(
        DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]),
        1,
    )
    .unwrap();

    // (a) residual identity, exact
    let mut worst = 0.0f64;
    let m = extract_minorisation(&two_state).unwrap();
    worst = worst.max(SplitChain::new(&two_state, m).unwrap().residual_identity_error());
    for i in 0..10u64 {
        let k = random_doeblin_chain(5, 0.02, &mut chain_rng(seed, 100 + i));
        let m = extract_minorisation(&k).unwrap();
        worst = worst.max(SplitChain::new(&k, m).unwrap().residual_identity_error());
    }
    report.check(
        "residual identity eps*nu + (1-eps)*eta = P^T",
        worst < 1e-12,
        format!("max entry error {worst:.2e}"),
    );

    // (b) geometric return times with 1e4 regenerations
    let verdict = diagnostics::classified_check([seed, seed + 1, seed + 2], |s| {
        let m = extract_minorisation(&two_state).unwrap();
        let chain = SplitChain::new(&two_state, m).unwrap();
        let r = verify_return_times(&chain, 10_000, &mut chain_rng(s, 7));
        r.passes(DEFAULT_ALPHA)
    });
    report.check(
        "renewal gaps are iid Geom(eps) (KS, chi2, lag autocorr)",
        verdict != CheckVerdict::Broken,
        format!("{verdict:?}"),
    );

    // (c) renewal-time stationarity: series oracle + empirical law
    let mut worst_series = 0.0f64;
    for i in 0..10u64 {
        let k = random_doeblin_chain(5, 0.02, &mut chain_rng(seed, 200 + i));
        let m = extract_minorisation(&k).unwrap();
        let chain = SplitChain::new(&k, m).unwrap();
        let pi = stationary_distribution(&k.horizon_kernel()).unwrap();
        worst_series = worst_series.max((chain.renewal_stationarity_series() - pi).amax());
    }
    report.check(
        "stationarity series equals the stationary eigenvector",
        worst_series < 1e-9,
        format!("max error over 10 random chains {worst_series:.2e}"),
    );
    let verdict = diagnostics::classified_check([seed, seed + 1, seed + 2], |s| {
        let m = extract_minorisation(&two_state).unwrap();
        let chain = SplitChain::new(&two_state, m).unwrap();
        verify_renewal_stationarity(&chain, 10_000, &mut chain_rng(s, 8))
            .map(|r| r.passes())
            .unwrap_or(false)
    });
    report.check(
        "endpoint at renewal times is stationary (TV < 0.02)",
        verdict != CheckVerdict::Broken,
        format!("{verdict:?}"),
    );

    // (d) two-step regeneration: conditional lag-2 independence plus the
    // positive control on a sticky kernel
    let sticky = {
        let n = 4;
        let mut p = DMatrix::from_element(n, n, 0.15 / n as f64);
        for i in 0..n {
            p[(i, i)] += 0.85;
        }
        FiniteKernel::new(p, 1).unwrap()
    };
    let verdict = diagnostics::classified_check([seed, seed + 1, seed + 2], |s| {
        let m = extract_minorisation(&sticky).unwrap();
        let chain = SplitChain::new(&sticky, m).unwrap();
        let r = verify_atom_independence(&chain, 10_000, &mut chain_rng(s, 9));
        r.lag2_given_renewal.p_value > DEFAULT_ALPHA
            && r.nu_tv < 0.02
            && r.lag1_unconditional.p_value < DEFAULT_ALPHA
    });
    report.check(
        "lag-2 independence at the atom; lag-1 positive control detected",
        verdict != CheckVerdict::Broken,
        format!("{verdict:?}"),
    );

    report
}

// ---------------------------------------------------------------------------
// sbps-thinning
// ---------------------------------------------------------------------------

pub fn sbps_thinning_suite(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("sbps-thinning");

    // structural invariants along a duration-1e3 run
    let d = 3;
    let target = Gaussian::standard(d);
    let p = Precondition::isotropic(d, d as f64).unwrap();
    let cfg = SbpsConfig::default();
    let mut rng = chain_rng(seed, 0);
    let z = random_sphere_point(d, &mut rng);
    let v = sample_tangent_uniform(&z, &mut rng);
    let phase = PhasePoint::new(z, v).unwrap();
    let run = sbps_run(phase, 1000.0, &cfg, &p, &target, &mut rng).unwrap();
    report.check(
        "orthonormality along duration-1e3 path",
        run.diagnostics.max_orthonormality_error < 1e-8,
        format!("max deviation {:.2e}", run.diagnostics.max_orthonormality_error),
    );
    report.check(
        "thinning bound-violation fraction < 0.1%",
        run.diagnostics.violation_fraction() < 1e-3,
        format!(
            "{} violations / {} candidates",
            run.diagnostics.violations, run.diagnostics.candidates
        ),
    );

    // reflection involution and post-bounce rate at random phases
    let mut worst_inv = 0.0f64;
    let mut worst_post = 0.0f64;
    let mut tested = 0;
    while tested < 50 {
        let z = random_sphere_point(d, &mut rng);
        let v = sample_tangent_uniform(&z, &mut rng);
        let ph = PhasePoint::new(z, v).unwrap();
        if bounce_rate(&ph, &p, &target).unwrap() < 1e-6 {
            continue;
        }
        let r1 = reflect(&ph, &p, &target).unwrap();
        worst_post = worst_post.max(bounce_rate(&r1, &p, &target).unwrap());
        let r2 = reflect(&r1, &p, &target).unwrap();
        worst_inv = worst_inv.max((&r2.v - &ph.v).norm());
        tested += 1;
    }
    report.check(
        "reflection is an involution",
        worst_inv < 1e-9,
        format!("max |R(R(v)) - v| = {worst_inv:.2e}"),
    );
    report.check(
        "post-bounce rate is zero",
        worst_post < 1e-9,
        format!("max rate {worst_post:.2e}"),
    );

    // first-bounce-time law against the quadrature oracle
    let verdict = diagnostics::classified_check([seed, seed + 1, seed + 2], |s| {
        first_bounce_ks_pvalue(s).map(|p| p > DEFAULT_ALPHA).unwrap_or(false)
    });
    report.check(
        "first-bounce time matches 1 - exp(-integral of rate) (KS)",
        verdict != CheckVerdict::Broken,
        format!("{verdict:?}"),
    );

    report
}

/// KS p-value of 1e4 sampled first-bounce times on the 1-D Gaussian circle
/// against the cumulative-quadrature CDF.
pub fn first_bounce_ks_pvalue(seed: u64) -> crate::error::Result<f64> {
    let d = 1;
    let target = Gaussian::standard(d);
    let p = Precondition::isotropic(d, 1.0)?;
    let cfg = SbpsConfig { lambda_ref: 0.0, ..Default::default() };
    let z = SpherePoint::south_pole(d);
    let v = DVector::from_vec(vec![1.0, 0.0]);
    let phase = PhasePoint::new(z, v)?;

    let mut rng = chain_rng(seed, 1);
    let mut diag = SbpsDiagnostics::default();
    let mut draws = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        match next_event_time(&phase, &cfg, &p, &target, &mut rng, &mut diag)? {
            Pending::Event { tau, kind: EventKind::Bounce } => draws.push(tau),
            other => {
                return Err(crate::error::StereoError::Numerical(format!(
                    "expected a bounce, got {other:?}"
                )))
            }
        }
    }
    let rate = {
        let phase = phase.clone();
        let p = p.clone();
        move |t: f64| bounce_rate(&flow(&phase, t), &p, &target).unwrap()
    };
    let t_max = draws.iter().cloned().fold(0.0, f64::max) + 0.1;
    let steps = 80_000usize;
    let h = t_max / steps as f64;
    let mut cum = vec![0.0f64; steps + 1];
    for i in 0..steps {
        let a = i as f64 * h;
        cum[i + 1] = cum[i] + stats::simpson(&rate, a, a + h, 8);
    }
    let cdf = move |t: f64| {
        let idx = ((t / h) as usize).min(steps - 1);
        let frac = t / h - idx as f64;
        let lam = cum[idx] + frac * (cum[idx + 1] - cum[idx]);
        1.0 - (-lam).exp()
    };
    Ok(stats::ks_test(&draws, cdf).p_value)
}

// ---------------------------------------------------------------------------
// clt
// ---------------------------------------------------------------------------

/// One replicate of the uniform-on-sphere SRW experiment: the trace of
/// f = x_1 clipped to [-10, 10] over `n_steps` steps. `beta = None` runs
/// the plain sampler; `Some(beta)` runs the AIR version.
pub fn uniform_case_replicate(
    seed: u64,
    replicate: u64,
    n_steps: usize,
    beta: Option<f64>,
) -> Vec<f64> {
    let d = 10usize;
    let target = StudentT::new(d as f64, d).unwrap();
    let clip = |v: f64| v.clamp(-10.0, 10.0);
    let mut rng = chain_rng(seed, replicate);
    let x0 = DVector::from_element(d, 1.0);
    match beta {
        None => {
            let p = Precondition::isotropic(d, d as f64).unwrap();
            let cfg = SrwConfig::new(0.5).unwrap();
            let mut state = SrwState::from_x(&p, &target, &x0).unwrap();
            let mut out = Vec::with_capacity(n_steps);
            for _ in 0..n_steps {
                srw_step(&mut state, &cfg, &p, &target, &mut rng).unwrap();
                out.push(clip(state.x[0]));
            }
            out
        }
        Some(beta) => {
            let schedule = EpochSchedule::new(beta, LagRule::Pow2).unwrap();
            let cfg = AirConfig {
                schedule,
                bounds: ParamBounds::new(2.0, 50.0).unwrap(),
                n_epochs: schedule.epochs_to_cover(n_steps as u64),
                adapt: true,
                adapt_h: false,
                srw: SrwConfig::new(0.5).unwrap(),
                sbps: SbpsConfig::default(),
            };
            let result = air_run(
                SamplerKind::Srw,
                &target,
                &x0,
                &DVector::zeros(d),
                &(DMatrix::identity(d, d) * d as f64),
                &cfg,
                &mut rng,
            )
            .unwrap();
            result
                .epochs
                .iter()
                .flat_map(|e| e.samples.iter().map(|x| clip(x[0])))
                .take(n_steps)
                .collect()
        }
    }
}

/// Least-squares slope of log2(var) against log2(n).
fn loglog_slope(ns: &[usize], vars: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = vars.iter().map(|&v| v.log2()).collect();
    let mx = stats::mean(&xs);
    let my = stats::mean(&ys);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Anderson-Darling normality of standardized estimates plus the
/// log-log variance slope for one case of the uniform-sphere experiment.
pub struct CltCaseReport {
    pub ad_p_value: f64,
    pub slope: f64,
    pub slope_bound: f64,
    pub n_replicates: usize,
}

pub fn clt_case(seed: u64, beta: Option<f64>, n_replicates: usize) -> CltCaseReport {
    let n_steps = 1 << 14;
    let checkpoints: Vec<usize> = (10..=14).map(|e| 1usize << e).collect();
    let traces: Vec<Vec<f64>> =
        parallel_map(n_replicates, |rep| uniform_case_replicate(seed, rep as u64, n_steps, beta));

    // AD normality at t = 1e4
    let prefix: Vec<Vec<f64>> = traces.iter().map(|t| t[..10_000].to_vec()).collect();
    let normality = clt_from_traces(&prefix, 0.0, 100).unwrap();
    let ad_p_value = normality.anderson_darling.map(|r| r.p_value).unwrap_or(0.0);

    // variance decay across checkpoints
    let mut vars = Vec::new();
    for &n in &checkpoints {
        let estimates: Vec<f64> = traces.iter().map(|t| stats::mean(&t[..n])).collect();
        vars.push(stats::variance(&estimates));
    }
    let rate = beta.map(|b| (2.0 * b / (1.0 + b)).min(1.0)).unwrap_or(1.0);
    CltCaseReport {
        ad_p_value,
        slope: loglog_slope(&checkpoints, &vars),
        slope_bound: -rate + 0.15,
        n_replicates,
    }
}

pub fn clt_suite(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("clt");
    for (label, beta) in [("non-adaptive SRW", None), ("AIR SRW beta=2", Some(2.0))] {
        let verdict = diagnostics::classified_check([seed, seed + 1, seed + 2], |s| {
            let case = clt_case(s, beta, 200);
            case.ad_p_value > DEFAULT_ALPHA && case.slope <= case.slope_bound
        });
        report.check(
            format!("{label}: normality + WLLN rate"),
            verdict != CheckVerdict::Broken,
            format!("{verdict:?}"),
        );
    }
    report
}
