//! One runner per experiment kind. Each writes its CSV files into the output directory and
//! returns the checks and metrics that go into `summary.json`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use obs_transport::broad::{
    build_domain, solve_broad, AnalyticVelocity, BroadError, BroadGrid, ConstantVelocity, MapVelocity,
    VelocityField,
};
use obs_transport::characteristics::{advect, blowup_time, CharacteristicsError, SmoothIC};
use obs_transport::distribution::{
    bump_suite, delta_shock_solution, residual_suite, residual_transport, shock_with_speed,
    write_residual_report, DistributionError,
};
use obs_transport::eulerian::{
    alpha_sweep, run, sweep_improves, write_sweep, EulerianError, GridState, RunConfig,
};
use obs_transport::initial::Profile;
use obs_transport::kernels::{convolve, Boundary, KernelError, SampledField, UniformGrid};
use obs_transport::output::fmt_real;
use obs_transport::riemann::{classify, filtered_profile, PointValue, RiemannCase, RiemannError};
use obs_transport::{FilterScale, RiemannData};
use thiserror::Error;

use crate::config::{BroadVelocity, ExperimentConfig, Kind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error(transparent)]
    Characteristics(#[from] CharacteristicsError),
    #[error(transparent)]
    Broad(#[from] BroadError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Eulerian(#[from] EulerianError),
    #[error("{0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

/// Checks and scalar metrics produced by a run.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub metrics: Vec<(String, f64)>,
}

impl Report {
    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.push((name.to_string(), value));
    }

    /// Passes when `value <= threshold`.
    fn at_most(&mut self, name: &str, value: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            pass: value <= threshold,
            value,
            threshold,
        });
    }

    /// Passes when `value > threshold`.
    fn above(&mut self, name: &str, value: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            pass: value > threshold,
            value,
            threshold,
        });
    }

    fn flag(&mut self, name: &str, pass: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
        });
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn scale(cfg: &ExperimentConfig) -> Result<FilterScale, RunError> {
    Ok(FilterScale::new(cfg.alpha)?)
}

fn riemann_data(cfg: &ExperimentConfig) -> Result<RiemannData, RunError> {
    cfg.riemann
        .ok_or_else(|| RunError::Setup(format!("{} needs [riemann]", cfg.kind)))
}

pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Report, RunError> {
    match cfg.kind {
        Kind::RiemannExact => riemann_exact(cfg, out),
        Kind::FilteredProfile => filtered(cfg, out),
        Kind::Characteristics => characteristics(cfg, out),
        Kind::BroadSolve => broad_solve(cfg, out),
        Kind::VerifyTheorem3 => verify_weak_form(cfg, out),
        Kind::EulerianRun => eulerian_run(cfg, out),
        Kind::AlphaSweep => sweep(cfg, out),
    }
}

/// Mass of the exact solution in `[a, b]` at time `t`, integrating the piecewise-constant part
/// exactly between wave positions and adding the delta.
fn exact_mass(d: &RiemannData, a: f64, b: f64, t: f64) -> Result<f64, RunError> {
    let sol = classify(d)?;
    let mut cuts = vec![a, b];
    for x in [d.u_l * t, d.u_r * t, sol.sigma * t] {
        if x > a && x < b {
            cuts.push(x);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut mass = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            if let PointValue::Regular { rho, .. } = sol.evaluate(0.5 * (w[0] + w[1]), t)? {
                mass += rho * (w[1] - w[0]);
            }
        }
    }
    if sol.case == RiemannCase::DeltaShock && sol.sigma * t > a && sol.sigma * t < b {
        mass += sol.spatial_mass(t)?;
    }
    Ok(mass)
}

fn riemann_exact(cfg: &ExperimentConfig, out: &Path) -> Result<Report, RunError> {
    let d = riemann_data(cfg)?;
    let sol = classify(&d)?;
    let s = &cfg.sample;
    let mut w = create(out, "solution.csv")?;
    writeln!(w, "x,rho,u,on_shock")?;
    for x in linspace(s.x_min, s.x_max, s.points) {
        match sol.evaluate(x, s.t)? {
            PointValue::Regular { rho, u } => writeln!(w, "{},{},{},0", fmt_real(x), fmt_real(rho), fmt_real(u))?,
            PointValue::OnShock { u } => writeln!(w, "{},nan,{},1", fmt_real(x), fmt_real(u))?,
        }
    }
    w.flush()?;

    let mut r = Report::default();
    r.metric("sigma", sol.sigma);
    r.metric("u_delta", sol.u_delta);
    r.metric("weight_rate", sol.weight_rate);
    if sol.case == RiemannCase::DeltaShock {
        r.metric("shock_weight", sol.shock_weight(s.t)?);
        r.metric("spatial_mass", sol.spatial_mass(s.t)?);
    }
    // Mass in [a, b] changes only by the flux through the ends, provided no wave reaches them.
    let reach = d.u_l.abs().max(d.u_r.abs()) * s.t;
    if s.x_min < -reach && s.x_max > reach {
        let now = exact_mass(&d, s.x_min, s.x_max, s.t)?;
        let expected = -d.rho_l * s.x_min + d.rho_r * s.x_max + s.t * (d.rho_l * d.u_l - d.rho_r * d.u_r);
        r.at_most("mass-balance", (now - expected).abs() / expected.abs().max(1.0), 1e-12);
    }
    Ok(r)
}

fn filtered(cfg: &ExperimentConfig, out: &Path) -> Result<Report, RunError> {
    let d = riemann_data(cfg)?;
    let a = scale(cfg)?;
    let p = filtered_profile(&d, &cfg.kernel, a)?;
    let s = &cfg.sample;
    let mut w = create(out, "profile.csv")?;
    p.write_csv(&mut w, s.t, &linspace(s.x_min, s.x_max, s.points))?;
    w.flush()?;

    // Independent check: convolve the exact step on cells of width α/16 with an interface at σt.
    let shock = p.sigma() * s.t;
    let dx = cfg.alpha / 16.0;
    let half = ((s.x_max - s.x_min).max(16.0 * cfg.alpha) / dx).ceil() as usize;
    let grid = UniformGrid::cell_centered(shock - half as f64 * dx, shock + half as f64 * dx, 2 * half)?;
    let step = SampledField::from_fn(grid, Boundary::ConstantExtension, |x| {
        if x < shock {
            d.u_l
        } else {
            d.u_r
        }
    })?;
    let ubar = convolve(&step, &cfg.kernel, a)?;
    let err = ubar
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - p.ubar(grid.x(i), s.t)).abs())
        .fold(0.0, f64::max);

    let mut r = Report::default();
    r.metric("sigma", p.sigma());
    r.metric("u_delta", p.u_delta());
    r.metric("ubar_at_shock", p.ubar(shock, s.t));
    r.at_most("discrete-convolution", err, 1e-6);
    Ok(r)
}

fn smooth_ic(cfg: &ExperimentConfig) -> Result<SmoothIC, RunError> {
    let u0 = cfg
        .u0
        .ok_or_else(|| RunError::Setup(format!("{} needs [u0]", cfg.kind)))?;
    let rho0 = cfg.rho0.unwrap_or(Profile::Constant(1.0));
    Ok(SmoothIC::from_profiles(u0, rho0, cfg.particles.domain)?)
}

fn characteristics(cfg: &ExperimentConfig, out: &Path) -> Result<Report, RunError> {
    let ic = smooth_ic(cfg)?;
    let p = &cfg.particles;
    let map = advect(&ic, &cfg.kernel, scale(cfg)?, p.t_end, p.dt, p.n)?;
    let mut w = create(out, "trajectories.csv")?;
    map.write_csv(&mut w)?;
    w.flush()?;

    let mut r = Report::default();
    r.metric("blowup_time", blowup_time(&ic));
    r.metric("min_gap", map.min_gap());
    r.metric("particles", p.n as f64);
    r.above("non-crossing", map.min_gap(), 0.0);
    Ok(r)
}

fn broad_solve(cfg: &ExperimentConfig, out: &Path) -> Result<Report, RunError> {
    let b = &cfg.broad;
    let a = scale(cfg)?;
    let rho0_profile = cfg
        .rho0
        .ok_or_else(|| RunError::Setup("broad-solve needs [rho0]".into()))?;
    let velocity: Box<dyn VelocityField> = match b.velocity {
        BroadVelocity::Constant(c) => Box::new(ConstantVelocity(c)),
        BroadVelocity::Expanding => Box::new(AnalyticVelocity::expanding()),
        BroadVelocity::Particles => {
            let ic = smooth_ic(cfg)?;
            let p = &cfg.particles;
            let map = advect(&ic, &cfg.kernel, a, b.t_end, p.dt, p.n)?;
            let table = UniformGrid::spanning(p.domain.0, p.domain.1, p.n + 1)?;
            Box::new(MapVelocity::new(&map, &ic, table)?)
        }
    };
    let domain = build_domain(velocity.as_ref(), b.omega, b.t_end)?;
    let rho0 = move |x: f64| rho0_profile.value(x);
    let sampling = BroadGrid {
        nx: b.nx,
        nt: b.nt,
        substeps: b.substeps,
    };

    let mut r = Report::default();
    r.metric("omega_lo", domain.omega.0);
    r.metric("omega_hi", domain.omega.1);
    r.metric("max_speed", domain.max_speed);
    r.flag("certificate", domain.certificate.holds());
    match solve_broad(&rho0, velocity.as_ref(), &cfg.kernel, a, &domain, sampling, b.tol, b.max_iter) {
        Ok(sol) => {
            let mut w = create(out, "history.csv")?;
            sol.write_history(&mut w)?;
            w.flush()?;
            let mut w = create(out, "rho.csv")?;
            writeln!(w, "t,x,rho")?;
            let xs = sol.rho.grid.points();
            for (t, row) in sol.rho.times.iter().zip(&sol.rho.rows) {
                for (x, v) in xs.iter().zip(row) {
                    writeln!(w, "{},{},{}", fmt_real(*t), fmt_real(*x), fmt_real(*v))?;
                }
            }
            w.flush()?;
            r.metric("iterations", sol.iterations as f64);
            r.metric("final_residual", sol.final_residual);
            r.metric("lipschitz", sol.lipschitz);
            r.metric("max_ratio", sol.max_ratio());
            r.at_most("contraction", sol.max_ratio(), 0.55);
            r.flag("converged", true);
        }
        Err(BroadError::NotConverged {
            iterations,
            residual,
            ratios,
        }) => {
            let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
            r.metric("iterations", iterations as f64);
            r.metric("final_residual", residual);
            r.metric("max_ratio", max_ratio);
            r.at_most("contraction", max_ratio, 0.55);
            r.flag("converged", false);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(r)
}

fn verify_weak_form(cfg: &ExperimentConfig, out: &Path) -> Result<Report, RunError> {
    let d = riemann_data(cfg)?;
    let sol = classify(&d)?;
    let suite = &cfg.suite;
    let bumps = bump_suite(sol.sigma, cfg.seed, suite.bumps);
    let rows = residual_suite(&d, &cfg.kernel, scale(cfg)?, &bumps)?;
    let mut w = create(out, "residuals.csv")?;
    write_residual_report(&mut w, &rows)?;
    w.flush()?;

    let (rho, u) = delta_shock_solution(&d)?;
    let (rho_p, u_p) = shock_with_speed(&d, sol.sigma + suite.perturbation, sol.u_delta);
    let mut exact = Vec::with_capacity(bumps.len());
    let mut perturbed = Vec::with_capacity(bumps.len());
    for b in &bumps {
        exact.push(residual_transport(&rho, &u, b)?);
        perturbed.push(residual_transport(&rho_p, &u_p, b)?);
    }
    let mut w = create(out, "definition1.csv")?;
    writeln!(w, "bump_id,exact,perturbed")?;
    for (i, (e, p)) in exact.iter().zip(&perturbed).enumerate() {
        writeln!(w, "{i},{},{}", fmt_real(*e), fmt_real(*p))?;
    }
    w.flush()?;

    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let max_residual = rows.iter().map(|r| r.relative()).fold(0.0, f64::max);
    let max_pairing = rows.iter().map(|r| r.largest_pairing()).fold(0.0, f64::max);
    let mut r = Report::default();
    r.metric("max_residual", max_residual);
    r.metric("max_pairing", max_pairing);
    r.metric("definition1_residual", max_abs(&exact));
    r.metric("perturbed_residual", max_abs(&perturbed));
    r.at_most("observable-weak-form", max_residual, suite.threshold);
    r.above("nontrivial-pairings", max_pairing, 0.1);
    r.at_most("definition1", max_abs(&exact), suite.exact_tol);
    r.above("perturbation-detected", max_abs(&perturbed), 1e-4);
    Ok(r)
}

fn eulerian_run(cfg: &ExperimentConfig, out: &Path) -> Result<Report, RunError> {
    let g = &cfg.grid;
    let a = scale(cfg)?;
    let base = match cfg.riemann {
        Some(d) => RunConfig::for_riemann(&d),
        None => RunConfig::default(),
    };
    let fit_window = if g.t_end >= base.fit_window.1 {
        base.fit_window
    } else {
        (g.t_end / 3.0, g.t_end)
    };
    let run_cfg = RunConfig {
        cfl: g.cfl,
        t_end: g.t_end,
        max_dt: g.dt,
        output_every: g.output_every,
        window_half_width: g.window_half_width,
        fit_window,
        domain: g.domain,
        ..base
    };
    let init = match (&cfg.riemann, cfg.u0) {
        (Some(d), _) => GridState::riemann(d, g.domain, g.n, cfg.kernel.clone(), a)?,
        (None, Some(u0)) => {
            let grid = match g.boundary {
                Boundary::Periodic => UniformGrid::periodic(g.domain.0, g.domain.1, g.n)?,
                Boundary::ConstantExtension => UniformGrid::cell_centered(g.domain.0, g.domain.1, g.n)?,
            };
            let rho0 = cfg.rho0.unwrap_or(Profile::Constant(1.0));
            GridState::from_profiles(grid, rho0, u0, cfg.kernel.clone(), a, g.boundary)?
        }
        (None, None) => return Err(RunError::Setup("eulerian-run needs [riemann] or [u0]".into())),
    };
    let result = run(&init, &run_cfg)?;
    for (i, snap) in result.snapshots.iter().enumerate() {
        let mut w = create(out, &format!("snapshot_{i:03}.csv"))?;
        snap.write_csv(&mut w)?;
        w.flush()?;
    }
    let mut w = create(out, "diagnostics.csv")?;
    result.write_diagnostics(&mut w)?;
    w.flush()?;

    let last = result.final_state();
    let mut r = Report::default();
    r.metric("steps", last.steps as f64);
    r.metric("dt_min", result.min_dt);
    r.metric("dt_max", result.max_dt);
    if let Some(dt) = g.dt {
        r.metric("dt_requested", dt);
        r.metric("dt_recomputed", if result.max_dt < dt * (1.0 - 1e-12) { 1.0 } else { 0.0 });
    }
    r.metric("total_mass_initial", init.total_mass());
    r.metric("total_mass_final", last.total_mass());
    r.metric("clipped_mass", last.clipped_mass);

    let (lo, hi) = init
        .u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    let overshoot = last
        .u
        .iter()
        .map(|&v| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max);
    r.at_most("velocity-bounds", overshoot, slack);

    if g.boundary == Boundary::Periodic {
        let m0 = init.total_mass();
        r.at_most("mass-conservation", (last.total_mass() - m0).abs() / m0.abs().max(1.0), 1e-10);
    }
    if let Some(d) = cfg.riemann {
        let sol = classify(&d)?;
        if sol.case == RiemannCase::DeltaShock {
            if let Some(speed) = result.front_speed(fit_window) {
                r.metric("front_speed", speed);
                r.at_most("front-speed", ((speed - sol.sigma) / sol.sigma).abs(), 0.02);
            }
            if let Some(slope) = result.mass_slope(fit_window) {
                let rate = d.mass_rate(sol.sigma);
                r.metric("mass_slope", slope);
                r.metric("mass_rate_exact", rate);
                r.at_most("delta-mass-growth", ((slope - rate) / rate).abs(), 0.05);
            }
        }
    }
    Ok(r)
}

fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Report, RunError> {
    let d = riemann_data(cfg)?;
    let g = &cfg.grid;
    let run_cfg = RunConfig {
        cfl: g.cfl,
        t_end: g.t_end,
        max_dt: g.dt,
        domain: g.domain,
        window_half_width: g.window_half_width,
        alphas: cfg.sweep.alphas.clone(),
        grid_sizes: cfg.sweep.grid_sizes.clone(),
        ..RunConfig::for_riemann(&d)
    };
    let rows = alpha_sweep(&run_cfg, &d, &cfg.kernel)?;
    let mut w = create(out, "sweep.csv")?;
    write_sweep(&mut w, &rows)?;
    w.flush()?;

    let mut r = Report::default();
    if let Some(last) = rows.last() {
        r.metric("final_vel_err", last.vel_err);
        r.metric("final_slope_err", last.slope_err);
        r.metric("final_front_speed", last.front_speed);
    }
    r.flag("errors-decrease", sweep_improves(&rows, cfg.sweep.noise, 1e-9));
    Ok(r)
}
