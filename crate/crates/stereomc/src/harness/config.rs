//! Experiment configuration: a flat key-value file with `[sections]`.
//!
//! The schema is versioned (`schema_version = 1`); every field failure names
//! the offending section and key. See `presets.rs` for complete files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::harness::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Gaussian,
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerChoice {
    Srw,
    Sss,
    Sbps,
    Hmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleChoice {
    Poly,
    Pow2,
}

/// Starting point relative to the initial precondition.
#[derive(Debug, Clone)]
pub enum StartPoint {
    /// mu0 + sigma0^{1/2} e_1: latitude exactly 0 under gamma_0.
    Equator,
    /// Explicit coordinates (scalar values are replicated to length d).
    Point(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub target_kind: TargetKind,
    pub d: usize,
    pub dof: f64,
    pub target_shift: f64,

    pub sampler: SamplerChoice,
    pub h: Option<f64>,
    pub lambda_ref: f64,
    pub delta: f64,
    pub tau_w: f64,
    pub n_grid: usize,
    pub safety: f64,
    pub step_size: f64,
    pub n_leapfrog: usize,

    pub adapt_enabled: bool,
    pub beta: f64,
    pub rule: RuleChoice,
    pub poly_c: f64,
    pub bound_r: f64,
    pub bound_big_r: f64,
    pub n_epochs: usize,

    pub mu0: Vec<f64>,
    pub sigma0_scale: f64,
    pub x0: StartPoint,

    pub length: u64,
    pub seed: u64,
    pub out: PathBuf,
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str) -> Result<Sections, HarnessError> {
    let mut out: Sections = BTreeMap::new();
    let mut current = String::new(); // "" = top level
    out.insert(String::new(), BTreeMap::new());
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(HarnessError::Config(format!(
                    "line {}: malformed section header {line:?}",
                    lineno + 1
                )));
            }
            current = line[1..line.len() - 1].trim().to_string();
            out.entry(current.clone()).or_default();
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(HarnessError::Config(format!(
                "line {}: expected `key = value`, got {line:?}",
                lineno + 1
            )));
        };
        out.get_mut(&current)
            .unwrap()
            .insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

struct Reader<'a> {
    sections: &'a Sections,
}

impl<'a> Reader<'a> {
    fn raw(&self, section: &str, key: &str) -> Option<&'a str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(|s| s.as_str())
    }

    fn require(&self, section: &str, key: &str) -> Result<&'a str, HarnessError> {
        self.raw(section, key).ok_or_else(|| {
            HarnessError::Config(format!("missing required field `{section}.{key}`"))
        })
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, HarnessError> {
        let raw = self.require(section, key)?;
        raw.parse().map_err(|_| {
            HarnessError::Config(format!("field `{section}.{key}`: cannot parse {raw:?}"))
        })
    }

    fn parse_or<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, HarnessError> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                HarnessError::Config(format!("field `{section}.{key}`: cannot parse {raw:?}"))
            }),
        }
    }
}

fn parse_vector(raw: &str, d: usize, what: &str) -> Result<Vec<f64>, HarnessError> {
    let parts: Vec<&str> = raw.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    let values: Result<Vec<f64>, _> = parts.iter().map(|s| s.parse::<f64>()).collect();
    let values = values
        .map_err(|_| HarnessError::Config(format!("field `{what}`: cannot parse {raw:?}")))?;
    match values.len() {
        1 => Ok(vec![values[0]; d]),
        n if n == d => Ok(values),
        n => Err(HarnessError::Config(format!(
            "field `{what}`: expected 1 or {d} values, got {n}"
        ))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let sections = parse_sections(text)?;
        let r = Reader { sections: &sections };

        let version: u32 = r.parse("", "schema_version")?;
        if version != 1 {
            return Err(HarnessError::Config(format!(
                "unsupported schema_version {version} (this build understands 1)"
            )));
        }

        let target_kind = match r.require("target", "kind")? {
            "gaussian" => TargetKind::Gaussian,
            "student_t" => TargetKind::StudentT,
            other => {
                return Err(HarnessError::Config(format!(
                    "field `target.kind`: unknown target {other:?} (gaussian | student_t)"
                )))
            }
        };
        let d: usize = r.parse("target", "d")?;
        if d == 0 {
            return Err(HarnessError::Config("field `target.d`: must be >= 1".into()));
        }
        let dof: f64 = r.parse_or("target", "dof", 1.0)?;
        if target_kind == TargetKind::StudentT && !(dof > 0.0) {
            return Err(HarnessError::Config("field `target.dof`: must be > 0".into()));
        }
        let target_shift: f64 = r.parse_or("target", "shift", 0.0)?;

        let sampler = match r.require("sampler", "kind")? {
            "srw" => SamplerChoice::Srw,
            "sss" => SamplerChoice::Sss,
            "sbps" => SamplerChoice::Sbps,
            "hmc" => SamplerChoice::Hmc,
            other => {
                return Err(HarnessError::Config(format!(
                    "field `sampler.kind`: unknown sampler {other:?} (srw | sss | sbps | hmc)"
                )))
            }
        };
        let h: Option<f64> = match r.raw("sampler", "h") {
            None => None,
            Some(raw) => Some(raw.parse().map_err(|_| {
                HarnessError::Config(format!("field `sampler.h`: cannot parse {raw:?}"))
            })?),
        };
        let lambda_ref: f64 = r.parse_or("sampler", "lambda_ref", 1.0)?;
        let delta: f64 = r.parse_or("sampler", "delta", 0.01)?;
        let tau_w: f64 = r.parse_or("sampler", "tau_w", 0.1)?;
        let n_grid: usize = r.parse_or("sampler", "n_grid", 16)?;
        let safety: f64 = r.parse_or("sampler", "safety", 1.5)?;
        let step_size: f64 = r.parse_or("sampler", "step_size", 0.1)?;
        let n_leapfrog: usize = r.parse_or("sampler", "n_leapfrog", 10)?;

        let adapt_enabled: bool = r.parse_or("adaptation", "enabled", false)?;
        if adapt_enabled && sampler == SamplerChoice::Hmc {
            return Err(HarnessError::Config(
                "field `adaptation.enabled`: the hmc baseline has no stereographic parameters to adapt".into(),
            ));
        }
        let beta: f64 = r.parse_or("adaptation", "beta", 1.0)?;
        let rule = match r.raw("adaptation", "rule").unwrap_or("pow2") {
            "poly" => RuleChoice::Poly,
            "pow2" => RuleChoice::Pow2,
            other => {
                return Err(HarnessError::Config(format!(
                    "field `adaptation.rule`: unknown rule {other:?} (poly | pow2)"
                )))
            }
        };
        let poly_c: f64 = r.parse_or("adaptation", "c", 1.0)?;
        let bound_r: f64 = r.parse_or("adaptation", "r", 1e-4)?;
        let bound_big_r: f64 = r.parse_or("adaptation", "R", 1e6)?;
        let n_epochs: usize = r.parse_or("adaptation", "n_epochs", 16)?;
        if adapt_enabled && n_epochs == 0 {
            return Err(HarnessError::Config("field `adaptation.n_epochs`: must be >= 1".into()));
        }

        let mu0 = parse_vector(r.raw("init", "mu0").unwrap_or("0"), d, "init.mu0")?;
        let sigma0_scale: f64 = r.parse_or("init", "sigma0_scale", d as f64)?;
        if !(sigma0_scale > 0.0) {
            return Err(HarnessError::Config("field `init.sigma0_scale`: must be > 0".into()));
        }
        let x0 = match r.raw("init", "x0").unwrap_or("equator") {
            "equator" => StartPoint::Equator,
            raw => StartPoint::Point(parse_vector(raw, d, "init.x0")?),
        };

        let length: u64 = r.parse("run", "length")?;
        if length == 0 {
            return Err(HarnessError::Config("field `run.length`: must be >= 1".into()));
        }
        let seed: u64 = r.parse_or("run", "seed", 0)?;
        let out = PathBuf::from(r.require("run", "out")?);

        Ok(Self {
            target_kind,
            d,
            dof,
            target_shift,
            sampler,
            h,
            lambda_ref,
            delta,
            tau_w,
            n_grid,
            safety,
            step_size,
            n_leapfrog,
            adapt_enabled,
            beta,
            rule,
            poly_c,
            bound_r,
            bound_big_r,
            n_epochs,
            mu0,
            sigma0_scale,
            x0,
            length,
            seed,
            out,
        })
    }
}
