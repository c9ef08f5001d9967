//! Experiment configuration.
//!
//! A config is a TOML document with a few top-level keys and flat sections:
//!
//! ```toml
//! kind = "eulerian-run"       # see Kind::ALL
//! kernel = "helmholtz"        # helmholtz | gaussian | tent
//! alpha = 0.05
//! output_dir = "out/eulerian"
//! seed = 7
//!
//! [riemann]                   # rho_l, u_l, rho_r, u_r
//! [u0] / [rho0]               # name = preset, plus that preset's parameters
//! [grid]                      # Eulerian grid and time stepping
//! [sample]                    # abscissae and time slice for exact profiles
//! [particles]                 # particle advection
//! [broad]                     # broad-solution iteration
//! [suite]                     # bump suite for residual checks
//! [sweep]                     # alpha sweep
//! ```
//!
//! Validation walks the whole document and reports every problem with its field path.

use std::fmt;
use std::path::PathBuf;

use obs_transport::initial::{PresetParams, Profile, PRESETS};
use obs_transport::kernels::Boundary;
use obs_transport::riemann::{classify, RiemannCase, RiemannData};
use obs_transport::Kernel;
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    RiemannExact,
    FilteredProfile,
    Characteristics,
    BroadSolve,
    VerifyTheorem3,
    EulerianRun,
    AlphaSweep,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::RiemannExact,
        Kind::FilteredProfile,
        Kind::Characteristics,
        Kind::BroadSolve,
        Kind::VerifyTheorem3,
        Kind::EulerianRun,
        Kind::AlphaSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::RiemannExact => "riemann-exact",
            Kind::FilteredProfile => "filtered-profile",
            Kind::Characteristics => "characteristics",
            Kind::BroadSolve => "broad-solve",
            Kind::VerifyTheorem3 => "verify-theorem3",
            Kind::EulerianRun => "eulerian-run",
            Kind::AlphaSweep => "alpha-sweep",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Sections that must be present, as listed by `otlab presets`.
    pub fn requirements(self) -> &'static str {
        match self {
            Kind::RiemannExact => "[riemann]; optional [sample]",
            Kind::FilteredProfile => "[riemann] with u_l > u_r; optional [sample]",
            Kind::Characteristics => "[u0]; optional [rho0], [particles]",
            Kind::BroadSolve => "[rho0]; [u0] when broad.velocity = \"particles\"; optional [broad], [particles]",
            Kind::VerifyTheorem3 => "[riemann] with u_l > u_r; kernel = \"helmholtz\"; optional [suite]",
            Kind::EulerianRun => "[riemann] or [u0] (+ optional [rho0]); optional [grid]",
            Kind::AlphaSweep => "[riemann] with u_l > u_r; [sweep] with alphas and grid_sizes",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("{} problem(s) in config:\n{}", .0.len(), list(.0))]
    Invalid(Vec<FieldError>),
}

fn list(errors: &[FieldError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

impl ConfigError {
    /// Field paths of every reported problem.
    pub fn paths(&self) -> Vec<&str> {
        match self {
            ConfigError::Syntax(_) => Vec::new(),
            ConfigError::Invalid(errs) => errs.iter().map(|e| e.path.as_str()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub domain: (f64, f64),
    pub n: usize,
    pub boundary: Boundary,
    pub cfl: f64,
    pub t_end: f64,
    pub output_every: Option<f64>,
    /// Requested time step; the solver uses the CFL step when that is smaller.
    pub dt: Option<f64>,
    pub window_half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSection {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSection {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub domain: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BroadVelocity {
    Constant(f64),
    /// `u = x/(1+t)`
    Expanding,
    /// Filtered particle map of `[u0]`.
    Particles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadSection {
    pub velocity: BroadVelocity,
    pub omega: (f64, f64),
    pub t_end: f64,
    pub nx: usize,
    pub nt: usize,
    pub substeps: usize,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSection {
    pub bumps: usize,
    /// Largest accepted `|total| / max term` for the filtered weak form.
    pub threshold: f64,
    /// Largest accepted absolute residual of the unfiltered weak form.
    pub exact_tol: f64,
    /// Shift applied to the shock speed in the sensitivity control.
    pub perturbation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
    pub grid_sizes: Vec<usize>,
    pub noise: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub kernel: Kernel,
    pub alpha: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub riemann: Option<RiemannData>,
    pub u0: Option<Profile>,
    pub rho0: Option<Profile>,
    pub grid: GridSection,
    pub sample: SampleSection,
    pub particles: ParticleSection,
    pub broad: BroadSection,
    pub suite: SuiteSection,
    pub sweep: SweepSection,
}

const TOP_KEYS: [&str; 5] = ["kind", "kernel", "alpha", "output_dir", "seed"];
const PROFILE_KEYS: [&str; 10] = [
    "name", "left", "right", "width", "amplitude", "center", "radius", "base", "height", "value",
];
const SECTIONS: [(&str, &[&str]); 10] = [
    ("riemann", &["rho_l", "u_l", "rho_r", "u_r"]),
    ("u0", &PROFILE_KEYS),
    ("rho0", &PROFILE_KEYS),
    (
        "grid",
        &["domain", "n", "boundary", "cfl", "t_end", "output_every", "dt", "window_half_width"],
    ),
    ("sample", &["x_min", "x_max", "points", "t"]),
    ("particles", &["n", "dt", "t_end", "domain"]),
    (
        "broad",
        &["velocity", "speed", "omega", "t_end", "nx", "nt", "substeps", "tol", "max_iter"],
    ),
    ("suite", &["bumps", "threshold", "exact_tol", "perturbation"]),
    ("sweep", &["alphas", "grid_sizes", "noise"]),
    ("notes", &[]),
];

/// Collects values and problems while walking the document.
struct Reader<'a> {
    root: &'a Table,
    errors: Vec<FieldError>,
}

fn path(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

fn as_real(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl<'a> Reader<'a> {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.into(),
            message: message.into(),
        });
    }

    fn table(&self, section: &str) -> Option<&'a Table> {
        if section.is_empty() {
            Some(self.root)
        } else {
            self.root.get(section).and_then(Value::as_table)
        }
    }

    fn has(&self, section: &str) -> bool {
        self.table(section).is_some()
    }

    fn raw(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.table(section).and_then(|t| t.get(key))
    }

    fn real_opt(&mut self, section: &str, key: &str, check: impl Fn(f64) -> Result<(), String>) -> Option<f64> {
        let v = self.raw(section, key)?;
        match as_real(v) {
            Some(x) if x.is_finite() => match check(x) {
                Ok(()) => Some(x),
                Err(m) => {
                    self.fail(path(section, key), m);
                    None
                }
            },
            _ => {
                self.fail(path(section, key), format!("expected a finite number, found {v}"));
                None
            }
        }
    }

    fn real(&mut self, section: &str, key: &str, default: f64, check: impl Fn(f64) -> Result<(), String>) -> f64 {
        self.real_opt(section, key, check).unwrap_or(default)
    }

    fn required_real(&mut self, section: &str, key: &str) -> f64 {
        if self.raw(section, key).is_none() {
            self.fail(path(section, key), "missing field");
            return f64::NAN;
        }
        self.real_opt(section, key, |_| Ok(())).unwrap_or(f64::NAN)
    }

    fn count(&mut self, section: &str, key: &str, default: usize, min: usize) -> usize {
        match self.raw(section, key) {
            None => default,
            Some(Value::Integer(i)) if *i >= min as i64 => *i as usize,
            Some(v) => {
                self.fail(path(section, key), format!("expected an integer >= {min}, found {v}"));
                default
            }
        }
    }

    fn string(&mut self, section: &str, key: &str) -> Option<&'a str> {
        match self.raw(section, key) {
            None => None,
            Some(Value::String(s)) => Some(s.as_str()),
            Some(v) => {
                self.fail(path(section, key), format!("expected a string, found {v}"));
                None
            }
        }
    }

    fn interval(&mut self, section: &str, key: &str, default: (f64, f64)) -> (f64, f64) {
        match self.raw(section, key) {
            None => default,
            Some(Value::Array(a)) if a.len() == 2 => match (as_real(&a[0]), as_real(&a[1])) {
                (Some(lo), Some(hi)) if lo.is_finite() && hi.is_finite() && lo < hi => (lo, hi),
                _ => {
                    self.fail(path(section, key), "expected [lo, hi] with lo < hi");
                    default
                }
            },
            Some(v) => {
                self.fail(path(section, key), format!("expected [lo, hi], found {v}"));
                default
            }
        }
    }

    fn reals(&mut self, section: &str, key: &str) -> Vec<f64> {
        match self.raw(section, key) {
            None => Vec::new(),
            Some(Value::Array(a)) => {
                let vals: Vec<Option<f64>> = a.iter().map(as_real).collect();
                if vals.iter().all(|v| v.is_some_and(f64::is_finite)) {
                    vals.into_iter().flatten().collect()
                } else {
                    self.fail(path(section, key), "expected a list of numbers");
                    Vec::new()
                }
            }
            Some(v) => {
                self.fail(path(section, key), format!("expected a list, found {v}"));
                Vec::new()
            }
        }
    }

    fn counts(&mut self, section: &str, key: &str) -> Vec<usize> {
        match self.raw(section, key) {
            None => Vec::new(),
            Some(Value::Array(a)) if a.iter().all(|v| matches!(v, Value::Integer(i) if *i > 0)) => {
                a.iter().filter_map(Value::as_integer).map(|i| i as usize).collect()
            }
            Some(v) => {
                self.fail(path(section, key), format!("expected a list of positive integers, found {v}"));
                Vec::new()
            }
        }
    }

    fn unknown_keys(&mut self) {
        for (key, value) in self.root {
            if TOP_KEYS.contains(&key.as_str()) {
                continue;
            }
            match SECTIONS.iter().find(|(name, _)| name == key) {
                None => self.fail(key.clone(), "unknown field or section"),
                Some((name, allowed)) => match value.as_table() {
                    None => self.fail(key.clone(), "expected a section"),
                    Some(t) if *name != "notes" => {
                        for k in t.keys() {
                            if !allowed.contains(&k.as_str()) {
                                self.fail(path(name, k), "unknown field");
                            }
                        }
                    }
                    Some(_) => {}
                },
            }
        }
    }

    fn profile(&mut self, section: &str) -> Option<Profile> {
        if !self.has(section) {
            return None;
        }
        let Some(name) = self.string(section, "name") else {
            if self.raw(section, "name").is_none() {
                self.fail(path(section, "name"), "missing field");
            }
            return None;
        };
        let d = PresetParams::default();
        let any = |_: f64| Ok(());
        let p = PresetParams {
            left: self.real(section, "left", d.left, any),
            right: self.real(section, "right", d.right, any),
            width: self.real(section, "width", d.width, any),
            amplitude: self.real(section, "amplitude", d.amplitude, any),
            center: self.real(section, "center", d.center, any),
            radius: self.real(section, "radius", d.radius, any),
            base: self.real(section, "base", d.base, any),
            height: self.real(section, "height", d.height, any),
        };
        if name == "constant" {
            return Some(Profile::Constant(self.real(section, "value", 1.0, any)));
        }
        match Profile::from_name(name, &p) {
            Ok(profile) => Some(profile),
            Err(e) => {
                let known = PRESETS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ");
                self.fail(
                    path(section, "name"),
                    format!("{e} (known presets: {known}, constant; see `otlab presets`)"),
                );
                None
            }
        }
    }
}

fn positive(x: f64) -> Result<(), String> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(format!("must be positive, got {x}"))
    }
}

fn non_negative(x: f64) -> Result<(), String> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(format!("must be non-negative, got {x}"))
    }
}

fn unit_interval(x: f64) -> Result<(), String> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(format!("must lie in (0, 1], got {x}"))
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut r = Reader {
        root: &root,
        errors: Vec::new(),
    };
    r.unknown_keys();

    let kind = match r.string("", "kind") {
        Some(name) => match Kind::from_name(name) {
            Some(k) => Some(k),
            None => {
                let known = Kind::ALL.map(Kind::name).join(", ");
                r.fail("kind", format!("unknown experiment kind '{name}' (expected one of {known})"));
                None
            }
        },
        None => {
            if r.raw("", "kind").is_none() {
                r.fail("kind", "missing field");
            }
            None
        }
    };

    let kernel = match r.string("", "kernel").unwrap_or("helmholtz") {
        name => match Kernel::preset(name) {
            Ok(k) => Some(k),
            Err(_) => {
                let known = Kernel::preset_names().join(", ");
                r.fail("kernel", format!("unknown kernel '{name}' (expected one of {known})"));
                None
            }
        },
    };
    let alpha = r.real("", "alpha", 0.1, positive);
    let output_dir = PathBuf::from(r.string("", "output_dir").unwrap_or("out"));
    let seed = match r.raw("", "seed") {
        None => 7,
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(v) => {
            r.fail("seed", format!("expected a non-negative integer, found {v}"));
            7
        }
    };

    let riemann = if r.has("riemann") {
        let vals = ["rho_l", "u_l", "rho_r", "u_r"].map(|k| r.required_real("riemann", k));
        if vals.iter().all(|v| v.is_finite()) {
            match RiemannData::new(vals[0], vals[1], vals[2], vals[3]) {
                Ok(d) => Some(d),
                Err(e) => {
                    r.fail("riemann", e.to_string());
                    None
                }
            }
        } else {
            None
        }
    } else {
        None
    };
    let u0 = r.profile("u0");
    let rho0 = r.profile("rho0");

    let boundary = match r.string("grid", "boundary").unwrap_or("constant") {
        "constant" => Boundary::ConstantExtension,
        "periodic" => Boundary::Periodic,
        other => {
            r.fail("grid.boundary", format!("expected \"constant\" or \"periodic\", found \"{other}\""));
            Boundary::ConstantExtension
        }
    };
    let grid = GridSection {
        domain: r.interval("grid", "domain", (-0.5, 2.0)),
        n: r.count("grid", "n", 1000, 3),
        boundary,
        cfl: r.real("grid", "cfl", 0.8, unit_interval),
        t_end: r.real("grid", "t_end", 1.5, non_negative),
        output_every: r.real_opt("grid", "output_every", positive),
        dt: r.real_opt("grid", "dt", positive),
        window_half_width: r.real_opt("grid", "window_half_width", positive),
    };
    let sample = SampleSection {
        x_min: r.real("sample", "x_min", -1.0, |_| Ok(())),
        x_max: r.real("sample", "x_max", 2.0, |_| Ok(())),
        points: r.count("sample", "points", 301, 2),
        t: r.real("sample", "t", 1.0, positive),
    };
    if sample.x_min >= sample.x_max {
        r.fail("sample.x_max", "must exceed sample.x_min");
    }
    let particles = ParticleSection {
        n: r.count("particles", "n", 400, 64),
        dt: r.real("particles", "dt", 0.01, positive),
        t_end: r.real("particles", "t_end", 2.0, positive),
        domain: r.interval("particles", "domain", (-6.0, 6.0)),
    };
    let velocity = match r.string("broad", "velocity").unwrap_or("expanding") {
        "expanding" => BroadVelocity::Expanding,
        "particles" => BroadVelocity::Particles,
        "constant" => BroadVelocity::Constant(r.real("broad", "speed", 0.0, |_| Ok(()))),
        other => {
            r.fail(
                "broad.velocity",
                format!("expected \"constant\", \"expanding\" or \"particles\", found \"{other}\""),
            );
            BroadVelocity::Expanding
        }
    };
    let broad = BroadSection {
        velocity,
        omega: r.interval("broad", "omega", (-6.0, 6.0)),
        t_end: r.real("broad", "t_end", 0.5, positive),
        nx: r.count("broad", "nx", 201, 2),
        nt: r.count("broad", "nt", 81, 2),
        substeps: r.count("broad", "substeps", 4, 1),
        tol: r.real("broad", "tol", 1e-10, positive),
        max_iter: r.count("broad", "max_iter", 60, 1),
    };
    let suite = SuiteSection {
        bumps: r.count("suite", "bumps", 10, 1),
        threshold: r.real("suite", "threshold", 1e-6, positive),
        exact_tol: r.real("suite", "exact_tol", 1e-8, positive),
        perturbation: r.real("suite", "perturbation", 0.1, |x| {
            if x != 0.0 {
                Ok(())
            } else {
                Err("must be non-zero".into())
            }
        }),
    };
    let sweep = SweepSection {
        alphas: r.reals("sweep", "alphas"),
        grid_sizes: r.counts("sweep", "grid_sizes"),
        noise: r.real("sweep", "noise", 0.1, non_negative),
    };

    if let Some(kind) = kind {
        let needs_shock = |r: &mut Reader| match riemann.as_ref().map(classify) {
            Some(Ok(sol)) if sol.case != RiemannCase::DeltaShock => {
                r.fail("riemann", format!("{kind} needs delta-shock data (u_l > u_r), got a {}", sol.case));
            }
            _ => {}
        };
        let require = |r: &mut Reader, section: &str| {
            if !r.has(section) {
                r.fail(section, format!("section required for {kind}"));
            }
        };
        match kind {
            Kind::RiemannExact => require(&mut r, "riemann"),
            Kind::FilteredProfile => {
                require(&mut r, "riemann");
                needs_shock(&mut r);
            }
            Kind::Characteristics => require(&mut r, "u0"),
            Kind::BroadSolve => {
                require(&mut r, "rho0");
                if broad.velocity == BroadVelocity::Particles {
                    require(&mut r, "u0");
                }
            }
            Kind::VerifyTheorem3 => {
                require(&mut r, "riemann");
                needs_shock(&mut r);
                if kernel.as_ref().is_some_and(|k| k.name() != "helmholtz") {
                    r.fail("kernel", "verify-theorem3 supports only the helmholtz kernel");
                }
            }
            Kind::EulerianRun => {
                if !r.has("riemann") && !r.has("u0") {
                    r.fail("riemann", "eulerian-run needs [riemann] or [u0]");
                }
                if r.has("riemann") && grid.boundary == Boundary::Periodic {
                    r.fail("grid.boundary", "Riemann data needs the constant boundary");
                }
                let dx = (grid.domain.1 - grid.domain.0) / grid.n as f64;
                if dx > alpha {
                    r.fail("grid.n", format!("dx = {dx} does not resolve alpha = {alpha}"));
                }
                // the mass window follows the shock from 0 to σ t_end and must stay on the grid
                if let Some(sol) = riemann.as_ref().and_then(|d| classify(d).ok()) {
                    if sol.case == RiemannCase::DeltaShock {
                        let h = grid.window_half_width.unwrap_or(5.0 * alpha + 5.0 * dx);
                        let end = sol.sigma * grid.t_end;
                        let (a, b) = (end.min(0.0), end.max(0.0));
                        if a - h < grid.domain.0 || b + h > grid.domain.1 {
                            r.fail(
                                "grid.domain",
                                format!(
                                    "mass window of half-width {h} around the shock path [{a}, {b}] leaves the domain"
                                ),
                            );
                        }
                    }
                }
            }
            Kind::AlphaSweep => {
                require(&mut r, "riemann");
                needs_shock(&mut r);
                validate_sweep(&mut r, &sweep, &grid);
            }
        }
    }

    if !r.errors.is_empty() {
        return Err(ConfigError::Invalid(r.errors));
    }
    Ok(ExperimentConfig {
        kind: kind.expect("kind validated"),
        kernel: kernel.expect("kernel validated"),
        alpha,
        output_dir,
        seed,
        riemann,
        u0,
        rho0,
        grid,
        sample,
        particles,
        broad,
        suite,
        sweep,
    })
}

fn validate_sweep(r: &mut Reader, sweep: &SweepSection, grid: &GridSection) {
    if sweep.alphas.is_empty() {
        r.fail("sweep.alphas", "alpha list is empty");
        return;
    }
    if sweep.alphas.iter().any(|&a| a <= 0.0) {
        r.fail("sweep.alphas", "alphas must be positive");
    }
    if sweep.alphas.windows(2).any(|w| w[1] >= w[0]) {
        r.fail("sweep.alphas", "alphas must be strictly decreasing");
    }
    if sweep.grid_sizes.len() != sweep.alphas.len() {
        r.fail(
            "sweep.grid_sizes",
            format!("{} grid sizes for {} alphas", sweep.grid_sizes.len(), sweep.alphas.len()),
        );
        return;
    }
    for (i, (&a, &n)) in sweep.alphas.iter().zip(&sweep.grid_sizes).enumerate() {
        let width = grid.domain.1 - grid.domain.0 + 2.0 * obs_transport::eulerian::SWEEP_MARGIN * a;
        let dx = width / n as f64;
        if dx > 0.25 * a {
            r.fail(
                format!("sweep.grid_sizes[{i}]"),
                format!("dx = {dx:.3e} exceeds alpha/4 = {:.3e}", 0.25 * a),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_riemann_config_gets_defaults() {
        let cfg = parse_config(
            "kind = \"riemann-exact\"\n[riemann]\nrho_l = 1.0\nu_l = 2.0\nrho_r = 1.0\nu_r = 0.0\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, Kind::RiemannExact);
        assert_eq!(cfg.kernel.name(), "helmholtz");
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.sample.points, 301);
    }

    #[test]
    fn every_problem_is_reported_with_its_path() {
        let err = parse_config(
            "kind = \"alpha-sweep\"\nalpha = -1\nkernel = \"box\"\nmystery = 3\n[riemann]\nrho_l = 1\nu_l = 2\nrho_r = -1\nu_r = 0\n[sweep]\nalphas = []\n",
        )
        .unwrap_err();
        let paths = err.paths();
        for p in ["alpha", "kernel", "mystery", "riemann", "sweep.alphas"] {
            assert!(paths.contains(&p), "{p} missing from {paths:?}");
        }
    }

    #[test]
    fn theorem_check_requires_helmholtz() {
        let err = parse_config(
            "kind = \"verify-theorem3\"\nkernel = \"gaussian\"\n[riemann]\nrho_l = 1\nu_l = 2\nrho_r = 1\nu_r = 0\n",
        )
        .unwrap_err();
        assert_eq!(err.paths(), vec!["kernel"]);
    }

    #[test]
    fn unknown_kind_and_preset() {
        let err = parse_config("kind = \"nope\"").unwrap_err();
        assert_eq!(err.paths(), vec!["kind"]);
        let err = parse_config("kind = \"characteristics\"\n[u0]\nname = \"zigzag\"\n").unwrap_err();
        assert!(err.to_string().contains("otlab presets"));
    }

    #[test]
    fn syntax_errors_are_not_field_errors() {
        assert!(matches!(parse_config("kind = "), Err(ConfigError::Syntax(_))));
    }
}
