//! Experiment runner behind both the examples and the thin CLI: builds
//! targets and samplers from an [`config::ExperimentConfig`], runs them with
//! pinned seeds, and writes `trace.csv`, `params.csv`, `events.csv` (SBPS)
//! and `report.txt` into the output directory.

pub mod config;
pub mod par;
pub mod plot;
pub mod presets;
pub mod verify;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use crate::adapt::{
    air_run, AirConfig, AirResult, EpochSchedule, LagRule, ParamBounds, SamplerKind,
};
use crate::error::StereoError;
use crate::geometry::Precondition;
use crate::hmc::{hmc_step, HmcConfig};
use crate::rng::chain_rng;
use crate::sbps::SbpsConfig;
use crate::srw::SrwConfig;
use crate::targets::{Affine, Gaussian, StudentT, Target};
use crate::trace::{write_trace_csv, StepKind, TraceRecord};

use config::{ExperimentConfig, RuleChoice, SamplerChoice, StartPoint, TargetKind};

/// Harness failures, split by the exit code they map to (2 = configuration,
/// 3 = numerical abort).
#[derive(Debug)]
pub enum HarnessError {
    Config(String),
    Numerical(String),
    Io(std::io::Error),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(m) => write!(f, "configuration error: {m}"),
            HarnessError::Numerical(m) => write!(f, "numerical failure: {m}"),
            HarnessError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io(_) => 2,
            HarnessError::Numerical(_) => 3,
        }
    }
}

impl From<StereoError> for HarnessError {
    fn from(e: StereoError) -> Self {
        match e {
            StereoError::InvalidConfig(m) => HarnessError::Config(m),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}

/// Summary returned to the caller after the artifacts are on disk.
#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub trace_rows: usize,
    pub n_epochs: usize,
    pub final_mu_norm: f64,
    pub wall_seconds: f64,
}

fn build_target(cfg: &ExperimentConfig) -> Result<Box<dyn Target>, HarnessError> {
    let base: Box<dyn Target> = match cfg.target_kind {
        TargetKind::Gaussian => Box::new(Gaussian::standard(cfg.d)),
        TargetKind::StudentT => Box::new(StudentT::new(cfg.dof, cfg.d)?),
    };
    if cfg.target_shift != 0.0 {
        let shift = DVector::from_element(cfg.d, cfg.target_shift);
        let t: Box<dyn Target> = match cfg.target_kind {
            TargetKind::Gaussian => Box::new(Affine::shifted(Gaussian::standard(cfg.d), shift)?),
            TargetKind::StudentT => {
                Box::new(Affine::shifted(StudentT::new(cfg.dof, cfg.d)?, shift)?)
            }
        };
        return Ok(t);
    }
    Ok(base)
}

fn initial_point(
    cfg: &ExperimentConfig,
    p: &Precondition,
) -> Result<DVector<f64>, HarnessError> {
    match &cfg.x0 {
        StartPoint::Point(v) => Ok(DVector::from_vec(v.clone())),
        StartPoint::Equator => {
            // |sigma0^{-1/2}(x - mu0)| = 1 puts the start on the equator
            let mut e1 = DVector::zeros(cfg.d);
            e1[0] = 1.0;
            Ok(p.mu() + p.sigma_half() * e1)
        }
    }
}

fn air_config(cfg: &ExperimentConfig) -> Result<AirConfig, HarnessError> {
    let rule = match cfg.rule {
        RuleChoice::Poly => LagRule::Poly { c: cfg.poly_c },
        RuleChoice::Pow2 => LagRule::Pow2,
    };
    Ok(AirConfig {
        schedule: EpochSchedule::new(cfg.beta, rule)?,
        bounds: ParamBounds::new(cfg.bound_r, cfg.bound_big_r)?,
        n_epochs: cfg.n_epochs,
        adapt: cfg.adapt_enabled,
        adapt_h: false,
        srw: SrwConfig::new(cfg.h.unwrap_or(0.1 / cfg.d as f64))?,
        sbps: SbpsConfig {
            lambda_ref: cfg.lambda_ref,
            tau_w: cfg.tau_w,
            n_grid: cfg.n_grid,
            safety: cfg.safety,
            delta: cfg.delta,
        },
    })
}

/// Runs the configured experiment and writes all artifacts under
/// `cfg.out`. The same `(config, seed)` pair always produces bit-identical
/// files.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let started = std::time::Instant::now();
    std::fs::create_dir_all(&cfg.out).map_err(HarnessError::Io)?;
    let target = build_target(cfg)?;
    let mut rng = chain_rng(cfg.seed, 0);

    let mu0 = DVector::from_vec(cfg.mu0.clone());
    let sigma0 = DMatrix::identity(cfg.d, cfg.d) * cfg.sigma0_scale;
    let p0 = Precondition::new(mu0.clone(), sigma0.clone())?;
    let x0 = initial_point(cfg, &p0)?;

    if cfg.sampler == SamplerChoice::Hmc {
        return run_hmc(cfg, target.as_ref(), x0, started);
    }

    let kind = match cfg.sampler {
        SamplerChoice::Srw => SamplerKind::Srw,
        SamplerChoice::Sss => SamplerKind::Sss,
        SamplerChoice::Sbps => SamplerKind::Sbps,
        SamplerChoice::Hmc => unreachable!(),
    };
    let mut air = air_config(cfg)?;
    if !cfg.adapt_enabled {
        // one fixed-parameter epoch covering the requested length
        air.n_epochs = 1;
        air.schedule = EpochSchedule::new(1.0, LagRule::Poly { c: cfg.length as f64 })?;
    }
    let result = air_run(kind, target.as_ref(), &x0, &mu0, &sigma0, &air, &mut rng)?;
    write_artifacts(cfg, kind, &result, started)
}

fn write_artifacts(
    cfg: &ExperimentConfig,
    kind: SamplerKind,
    result: &AirResult,
    started: std::time::Instant,
) -> Result<RunSummary, HarnessError> {
    // trace.csv
    let mut rows = Vec::new();
    let mut t_offset = 0.0;
    for (epoch, report) in result.epochs.iter().enumerate() {
        let param = &result.params[epoch];
        let mu_norm = param.mu.norm();
        let sigma_trace = param.sigma.trace();
        for (i, (x, lat)) in report.samples.iter().zip(&report.latitudes).enumerate() {
            let (t, step_kind) = match kind {
                SamplerKind::Sbps => (t_offset + i as f64 * cfg.delta, StepKind::Skeleton),
                _ => (t_offset + i as f64, StepKind::Accept),
            };
            rows.push(TraceRecord {
                epoch,
                t,
                x1: x[0],
                latitude: *lat,
                kind: step_kind,
                mu_norm,
                sigma_trace,
            });
        }
        t_offset += report.length as f64;
    }
    write_trace_csv(&cfg.out.join("trace.csv"), &rows).map_err(HarnessError::Io)?;

    // params.csv
    let params_path = cfg.out.join("params.csv");
    {
        let mut w = BufWriter::new(File::create(&params_path).map_err(HarnessError::Io)?);
        writeln!(w, "epoch,mu_norm,sig_eig_min,sig_eig_mean,sig_eig_max,h,lambda_ref")
            .map_err(HarnessError::Io)?;
        for rec in &result.params {
            let eigs = rec.sigma_eigenvalues();
            let mean = eigs.iter().sum::<f64>() / eigs.len() as f64;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                rec.epoch,
                rec.mu.norm(),
                eigs.min(),
                mean,
                eigs.max(),
                rec.h,
                rec.lambda_ref
            )
            .map_err(HarnessError::Io)?;
        }
    }

    // events.csv for the PDMP
    if kind == SamplerKind::Sbps {
        let mut w = BufWriter::new(
            File::create(cfg.out.join("events.csv")).map_err(HarnessError::Io)?,
        );
        writeln!(w, "time,kind,latitude").map_err(HarnessError::Io)?;
        let mut t_offset = 0.0;
        for report in &result.epochs {
            for ev in &report.events {
                let kind_str = match ev.kind {
                    crate::sbps::EventKind::Bounce => "bounce",
                    crate::sbps::EventKind::Refresh => "refresh",
                };
                writeln!(w, "{},{},{}", t_offset + ev.time, kind_str, ev.latitude)
                    .map_err(HarnessError::Io)?;
            }
            t_offset += report.length as f64;
        }
    }

    // report.txt
    let wall = started.elapsed().as_secs_f64();
    let final_mu_norm = result.params.last().map(|r| r.mu.norm()).unwrap_or(0.0);
    {
        let mut w = BufWriter::new(
            File::create(cfg.out.join("report.txt")).map_err(HarnessError::Io)?,
        );
        writeln!(w, "sampler: {kind:?}").map_err(HarnessError::Io)?;
        writeln!(w, "dimension: {}", cfg.d).map_err(HarnessError::Io)?;
        writeln!(w, "seed: {}", cfg.seed).map_err(HarnessError::Io)?;
        writeln!(w, "epochs: {}", result.epochs.len()).map_err(HarnessError::Io)?;
        for (i, e) in result.epochs.iter().enumerate() {
            let rec = &result.params[i];
            writeln!(
                w,
                "epoch {i}: length {} samples {} mu_norm {:.6e} accept {} shrink_iters {} \
                 bounces {} refreshes {} wall {:.3}s",
                e.length,
                e.samples.len(),
                rec.mu.norm(),
                e.accepted,
                e.shrink_iterations,
                e.sbps.map(|s| s.bounces).unwrap_or(0),
                e.sbps.map(|s| s.refreshes).unwrap_or(0),
                e.wall.as_secs_f64()
            )
            .map_err(HarnessError::Io)?;
        }
        writeln!(w, "final mu_norm: {final_mu_norm:.6e}").map_err(HarnessError::Io)?;
        writeln!(w, "total wall: {wall:.3}s").map_err(HarnessError::Io)?;
    }

    Ok(RunSummary {
        out_dir: cfg.out.clone(),
        trace_rows: rows.len(),
        n_epochs: result.epochs.len(),
        final_mu_norm,
        wall_seconds: wall,
    })
}

fn run_hmc(
    cfg: &ExperimentConfig,
    target: &dyn Target,
    x0: DVector<f64>,
    started: std::time::Instant,
) -> Result<RunSummary, HarnessError> {
    let hmc_cfg = HmcConfig::new(cfg.step_size, cfg.n_leapfrog)?;
    let mut rng = chain_rng(cfg.seed, 0);
    let mut x = x0;
    let mut rows = Vec::with_capacity(cfg.length as usize);
    for i in 0..cfg.length {
        let step = hmc_step(&mut x, &hmc_cfg, target, &mut rng)?;
        // the baseline has no sphere or precondition: latitude is NaN and
        // the mu_norm column carries |x| for the failure-mode plots
        rows.push(TraceRecord {
            epoch: 0,
            t: i as f64,
            x1: x[0],
            latitude: f64::NAN,
            kind: if step.accepted { StepKind::Accept } else { StepKind::Reject },
            mu_norm: x.norm(),
            sigma_trace: 0.0,
        });
    }
    std::fs::create_dir_all(&cfg.out).map_err(HarnessError::Io)?;
    write_trace_csv(&cfg.out.join("trace.csv"), &rows).map_err(HarnessError::Io)?;
    let wall = started.elapsed().as_secs_f64();
    let mut w =
        BufWriter::new(File::create(cfg.out.join("report.txt")).map_err(HarnessError::Io)?);
    writeln!(w, "sampler: Hmc").map_err(HarnessError::Io)?;
    writeln!(w, "steps: {}", cfg.length).map_err(HarnessError::Io)?;
    writeln!(w, "final |x|: {:.6e}", x.norm()).map_err(HarnessError::Io)?;
    writeln!(w, "total wall: {wall:.3}s").map_err(HarnessError::Io)?;
    drop(w);
    Ok(RunSummary {
        out_dir: cfg.out.clone(),
        trace_rows: rows.len(),
        n_epochs: 1,
        final_mu_norm: x.norm(),
        wall_seconds: wall,
    })
}
