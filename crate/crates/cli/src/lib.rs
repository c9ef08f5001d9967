//! Config-driven experiment runner behind the `otlab` binary.

pub mod config;
pub mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use obs_transport::initial::PRESETS;
use obs_transport::Kernel;
use serde_json::{json, Map, Value};

pub use config::{parse_config, ConfigError, ExperimentConfig, Kind};
pub use experiments::{run_experiment, Check, Report, RunError};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

/// Result of `otlab run`.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub output_dir: Option<PathBuf>,
    pub summary: Value,
    pub message: String,
}

pub fn load_config(path: &Path) -> Result<(ExperimentConfig, String), ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::Syntax(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    Ok((cfg, text))
}

fn summary_json(kind: Kind, report: Option<&Report>, wall: f64, error: Option<&str>) -> Value {
    let mut checks = Map::new();
    let mut metrics = Map::new();
    if let Some(r) = report {
        for c in &r.checks {
            checks.insert(
                c.name.clone(),
                json!({ "pass": c.pass, "value": c.value, "threshold": c.threshold }),
            );
        }
        for (k, v) in &r.metrics {
            metrics.insert(k.clone(), json!(v));
        }
    }
    json!({
        "kind": kind.name(),
        "pass": error.is_none() && report.is_some_and(Report::pass),
        "checks": checks,
        "metrics": metrics,
        "wall_time_s": wall,
        "error": error,
    })
}

/// Validates the config, runs the experiment and writes `summary.json` plus a copy of the config.
/// `out` overrides the config's `output_dir`.
pub fn execute(config_path: &Path, out: Option<&Path>) -> Outcome {
    let (cfg, text) = match load_config(config_path) {
        Ok(v) => v,
        Err(e) => {
            return Outcome {
                exit_code: EXIT_INVALID,
                output_dir: None,
                summary: Value::Null,
                message: e.to_string(),
            }
        }
    };
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    let io_fail = |e: std::io::Error| Outcome {
        exit_code: EXIT_SOLVER,
        output_dir: Some(dir.clone()),
        summary: Value::Null,
        message: format!("cannot write to {}: {e}", dir.display()),
    };
    if let Err(e) = fs::create_dir_all(&dir).and_then(|_| fs::write(dir.join("config.toml"), &text)) {
        return io_fail(e);
    }
    log::info!("running {} into {}", cfg.kind, dir.display());
    let started = Instant::now();
    let result = run_experiment(&cfg, &dir);
    let wall = started.elapsed().as_secs_f64();
    let (summary, exit_code, message) = match &result {
        Ok(report) => {
            let code = if report.pass() { EXIT_PASS } else { EXIT_CHECK_FAILED };
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            let msg = if failed.is_empty() {
                format!("{}: all {} checks passed", cfg.kind, report.checks.len())
            } else {
                format!("{}: failed checks: {}", cfg.kind, failed.join(", "))
            };
            (summary_json(cfg.kind, Some(report), wall, None), code, msg)
        }
        Err(e) => {
            let msg = e.to_string();
            (summary_json(cfg.kind, None, wall, Some(&msg)), EXIT_SOLVER, format!("{}: {msg}", cfg.kind))
        }
    };
    let pretty = serde_json::to_string_pretty(&summary).expect("summary serializes");
    if let Err(e) = fs::write(dir.join("summary.json"), pretty + "\n") {
        return io_fail(e);
    }
    Outcome {
        exit_code,
        output_dir: Some(dir),
        summary,
        message,
    }
}

/// Text printed by `otlab presets`.
pub fn presets_text() -> String {
    let mut s = String::from("experiment kinds:\n");
    for k in Kind::ALL {
        s += &format!("  {:<18} {}\n", k.name(), k.requirements());
    }
    s += "\nkernels:\n";
    for name in Kernel::preset_names() {
        s += &format!("  {name}\n");
    }
    s += "\ninitial-condition presets ([u0] / [rho0] name):\n";
    for (name, desc) in PRESETS {
        s += &format!("  {name:<18} {desc}\n");
    }
    s += &format!("  {:<18} {}\n", "constant", "the constant `value`");
    s
}
