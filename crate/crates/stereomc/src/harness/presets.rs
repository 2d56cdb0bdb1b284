//! Canned experiment configurations for the heavy-tailed benchmark study.
//!
//! The scaled presets finish in minutes on a laptop by replacing the full
//! (d = 200, mu_0 = 1000) runs with d = 50, mu_0 = 100; pass `--full` to run
//! the original scale.

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "paper-fig7-scaled",
        description: "adaptive SRW on student_t(dof=2), equator start far from the mean",
    },
    Preset {
        name: "paper-sss-scaled",
        description: "adaptive SSS on the same heavy-tailed study",
    },
    Preset {
        name: "paper-sbps-scaled",
        description: "adaptive SBPS (lambda_ref = 1) on the same heavy-tailed study",
    },
    Preset {
        name: "paper-hmc-contrast",
        description: "untuned HMC baseline started in the tails (the failure mode)",
    },
];

/// Config text for a named preset, or `None` for unknown names.
pub fn preset_config(name: &str, full: bool, out: &str, seed: u64) -> Option<String> {
    let (d, mu0, epochs_srw, epochs_sss, epochs_sbps, hmc_len) = if full {
        (200usize, 1000.0, 96usize, 256usize, 128usize, 2_000_000u64)
    } else {
        (50usize, 100.0, 96, 128, 72, 60_000)
    };
    let stereo_common = |kind: &str, sampler_extra: &str, n_epochs: usize, rule: &str, c: f64| {
        format!(
            "schema_version = 1\n\
             [target]\n\
             kind = student_t\n\
             d = {d}\n\
             dof = 2.0\n\
             [sampler]\n\
             kind = {kind}\n\
             {sampler_extra}\
             [adaptation]\n\
             enabled = true\n\
             beta = 1.0\n\
             rule = {rule}\n\
             c = {c}\n\
             r = 0.01\n\
             R = 1000000\n\
             n_epochs = {n_epochs}\n\
             [init]\n\
             mu0 = {mu0}\n\
             sigma0_scale = {d}\n\
             x0 = equator\n\
             [run]\n\
             length = 1\n\
             seed = {seed}\n\
             out = {out}\n"
        )
    };
    match name {
        "paper-fig7-scaled" => Some(stereo_common(
            "srw",
            &format!("h = {}\n", 0.1 / d as f64),
            epochs_srw,
            "poly",
            256.0,
        )),
        "paper-sss-scaled" => Some(stereo_common("sss", "", epochs_sss, "poly", 24.0)),
        "paper-sbps-scaled" => Some(stereo_common(
            "sbps",
            "lambda_ref = 1.0\ndelta = 0.1\n",
            epochs_sbps,
            "poly",
            4.0,
        )),
        "paper-hmc-contrast" => Some(format!(
            "schema_version = 1\n\
             [target]\n\
             kind = student_t\n\
             d = {d}\n\
             dof = 2.0\n\
             [sampler]\n\
             kind = hmc\n\
             step_size = 0.1\n\
             n_leapfrog = 10\n\
             [init]\n\
             mu0 = 0\n\
             sigma0_scale = 1\n\
             x0 = {mu0}\n\
             [run]\n\
             length = {hmc_len}\n\
             seed = {seed}\n\
             out = {out}\n"
        )),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;

    #[test]
    fn every_preset_parses_at_both_scales() {
        for p in PRESETS {
            for full in [false, true] {
                let text = preset_config(p.name, full, "/tmp/out", 1).unwrap();
                let cfg = ExperimentConfig::parse(&text)
                    .unwrap_or_else(|e| panic!("preset {} ({full}): {e}", p.name));
                assert_eq!(cfg.d, if full { 200 } else { 50 });
            }
        }
        assert!(preset_config("nope", false, "/tmp/out", 1).is_none());
    }
}
