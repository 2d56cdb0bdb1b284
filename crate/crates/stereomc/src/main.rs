//! Thin command-line front end; all logic lives in the library.
//!
//! ```text
//! stereomc run    --config FILE [--seed S] [--out DIR]
//! stereomc run    --preset NAME [--full] [--seed S] [--out DIR]
//! stereomc plot   TRACE.csv COLUMN OUT.svg
//! stereomc verify SUITE [--seed S]
//! stereomc presets list
//! ```
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 numerical abort.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use stereomc::harness::config::ExperimentConfig;
use stereomc::harness::presets::{preset_config, PRESETS};
use stereomc::harness::verify::{run_suite, SUITES};
use stereomc::harness::{plot::plot_column, run, HarnessError};

/// Prints to stdout, swallowing broken pipes (`stereomc ... | head`).
fn out(text: std::fmt::Arguments) {
    let _ = std::io::stdout().write_fmt(text);
    let _ = std::io::stdout().write_all(b"\n");
}

const USAGE: &str = "\
usage:
  stereomc run --config FILE [--seed S] [--out DIR]
  stereomc run --preset NAME [--full] [--seed S] [--out DIR]
  stereomc plot TRACE.csv COLUMN OUT.svg
  stereomc verify SUITE [--seed S]        suites: geometry | splitchain | sbps-thinning | clt
  stereomc presets list

environment:
  STEREO_THREADS   caps replicate parallelism (default: all cores)
";

struct Flags {
    positional: Vec<String>,
    config: Option<PathBuf>,
    preset: Option<String>,
    full: bool,
    seed: Option<u64>,
    out: Option<String>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut flags = Flags {
        positional: Vec::new(),
        config: None,
        preset: None,
        full: false,
        seed: None,
        out: None,
    };
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "--config" => {
                let v = it.next().ok_or("--config needs a path")?;
                flags.config = Some(PathBuf::from(v));
            }
            "--preset" => {
                let v = it.next().ok_or("--preset needs a name")?;
                flags.preset = Some(v.clone());
            }
            "--seed" => {
                let v = it.next().ok_or("--seed needs a value")?;
                flags.seed = Some(v.parse().map_err(|_| format!("bad seed {v:?}"))?);
            }
            "--out" => {
                let v = it.next().ok_or("--out needs a directory")?;
                flags.out = Some(v.clone());
            }
            "--full" => flags.full = true,
            other if other.starts_with("--") => return Err(format!("unknown flag {other}")),
            other => flags.positional.push(other.to_string()),
        }
    }
    Ok(flags)
}

fn cmd_run(flags: Flags) -> Result<(), HarnessError> {
    let text = match (&flags.config, &flags.preset) {
        (Some(path), None) => std::fs::read_to_string(path).map_err(HarnessError::Io)?,
        (None, Some(name)) => {
            let out = flags.out.clone().unwrap_or_else(|| format!("out/{name}"));
            preset_config(name, flags.full, &out, flags.seed.unwrap_or(1)).ok_or_else(|| {
                HarnessError::Config(format!(
                    "unknown preset {name:?}; `stereomc presets list` shows the options"
                ))
            })?
        }
        _ => {
            return Err(HarnessError::Config(
                "run needs exactly one of --config FILE or --preset NAME".into(),
            ))
        }
    };
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(out) = flags.out {
        cfg.out = PathBuf::from(out);
    }
    // keep the exact config next to its artifacts
    std::fs::create_dir_all(&cfg.out).map_err(HarnessError::Io)?;
    std::fs::write(cfg.out.join("config.ini"), &text).map_err(HarnessError::Io)?;
    let summary = run(&cfg)?;
    out(format_args!(
        "wrote {} trace rows over {} epochs to {} in {:.1}s (final |mu| = {:.3e})",
        summary.trace_rows,
        summary.n_epochs,
        summary.out_dir.display(),
        summary.wall_seconds,
        summary.final_mu_norm
    ));
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first().cloned() else {
        eprint!("{USAGE}");
        return ExitCode::from(2);
    };
    let flags = match parse_flags(&args[1..]) {
        Ok(f) => f,
        Err(m) => {
            eprintln!("error: {m}");
            eprint!("{USAGE}");
            return ExitCode::from(2);
        }
    };

    match command.as_str() {
        "run" => match cmd_run(flags) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        "plot" => {
            if flags.positional.len() != 3 {
                eprintln!("error: plot needs TRACE.csv COLUMN OUT.svg");
                return ExitCode::from(2);
            }
            let csv = PathBuf::from(&flags.positional[0]);
            let out_path = PathBuf::from(&flags.positional[2]);
            match plot_column(&csv, &flags.positional[1], &out_path) {
                Ok(()) => {
                    out(format_args!("wrote {}", out_path.display()));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        "verify" => {
            let Some(suite) = flags.positional.first() else {
                eprintln!("error: verify needs a suite name ({})", SUITES.join(" | "));
                return ExitCode::from(2);
            };
            match run_suite(suite, flags.seed.unwrap_or(17)) {
                None => {
                    eprintln!("error: unknown suite {suite:?} ({})", SUITES.join(" | "));
                    ExitCode::from(2)
                }
                Some(report) => {
                    out(format_args!("{}", report.render().trim_end()));
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
            }
        }
        "presets" => {
            if flags.positional.first().map(String::as_str) != Some("list") {
                eprintln!("error: did you mean `stereomc presets list`?");
                return ExitCode::from(2);
            }
            for p in PRESETS {
                out(format_args!("{:22} {}", p.name, p.description));
            }
            ExitCode::SUCCESS
        }
        other => {
            eprintln!("error: unknown command {other:?}");
            eprint!("{USAGE}");
            ExitCode::from(2)
        }
    }
}
