//! Densities made of a bounded part plus weighted deltas on curves, their pairings with smooth
//! compactly supported test functions, and the weak-form residuals of the transport and
//! observable transport systems.
//!
//! A delta on a curve `C = {(x(s), t(s))}` acts as `⟨wδ_C, ψ⟩ = ∫ w(s) ψ(x(s),t(s)) |C′(s)| ds`.
//! Flux pairings `⟨ρu, ·⟩` carry the delta with weight `w·u_δ`.

use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{FilterScale, Kernel, KernelFamily};
use crate::output::fmt_real;
use crate::quadrature::{breakpoints, Adaptive, QuadratureError};
use crate::riemann::{classify, filtered_profile, RiemannCase, RiemannData, RiemannError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("test function domain: {0}")]
    Domain(String),
    #[error("pairing did not reach the requested precision: {0}")]
    Precision(#[from] QuadratureError),
    #[error("the observable residual is only available for the Helmholtz kernel, got `{0}`")]
    UnsupportedKernel(String),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
}

fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

fn bump_slope(r: f64) -> f64 {
    if r.abs() < 1.0 {
        let q = 1.0 - r * r;
        bump(r) * (-2.0 * r / (q * q))
    } else {
        0.0
    }
}

/// Tensor-product bump `b((x-x₀)/r_x) b((t-t₀)/r_t)` with `b(r) = exp(-1/(1-r²))` on `|r| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestBump {
    pub x0: f64,
    pub t0: f64,
    pub rx: f64,
    pub rt: f64,
}

/// Which derivative of a test function is paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    T,
    X,
}

impl TestBump {
    pub fn new(x0: f64, t0: f64, rx: f64, rt: f64) -> Result<Self, DistributionError> {
        if ![x0, t0, rx, rt].iter().all(|v| v.is_finite()) {
            return Err(DistributionError::Domain("bump parameters must be finite".into()));
        }
        if !(rx > 0.0 && rt > 0.0) {
            return Err(DistributionError::Domain(format!(
                "bump radii must be positive, got ({rx}, {rt})"
            )));
        }
        if t0 - rt <= 0.0 {
            return Err(DistributionError::Domain(format!(
                "bump support [{}, {}] in t must lie in t > 0",
                t0 - rt,
                t0 + rt
            )));
        }
        Ok(Self { x0, t0, rx, rt })
    }

    pub fn x_support(&self) -> (f64, f64) {
        (self.x0 - self.rx, self.x0 + self.rx)
    }

    pub fn t_support(&self) -> (f64, f64) {
        (self.t0 - self.rt, self.t0 + self.rt)
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        bump((x - self.x0) / self.rx) * bump((t - self.t0) / self.rt)
    }

    pub fn d_x(&self, x: f64, t: f64) -> f64 {
        bump_slope((x - self.x0) / self.rx) / self.rx * bump((t - self.t0) / self.rt)
    }

    pub fn d_t(&self, x: f64, t: f64) -> f64 {
        bump((x - self.x0) / self.rx) * bump_slope((t - self.t0) / self.rt) / self.rt
    }

    pub fn eval(&self, which: Derivative, x: f64, t: f64) -> f64 {
        match which {
            Derivative::Value => self.value(x, t),
            Derivative::T => self.d_t(x, t),
            Derivative::X => self.d_x(x, t),
        }
    }
}

type CurveFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A weighted delta on the parametrized curve `s ↦ (x(s), t(s))`, `s ∈ [a, b]`.
#[derive(Clone)]
pub struct CurveDelta {
    x: CurveFn,
    dx: CurveFn,
    t: CurveFn,
    dt: CurveFn,
    weight: CurveFn,
    interval: (f64, f64),
    /// `t(s) = s`, which lets pairings restrict to the time support of the test function.
    time_parametrized: bool,
}

impl std::fmt::Debug for CurveDelta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CurveDelta")
            .field("interval", &self.interval)
            .field("time_parametrized", &self.time_parametrized)
            .finish()
    }
}

impl CurveDelta {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dx: impl Fn(f64) -> f64 + Send + Sync + 'static,
        t: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dt: impl Fn(f64) -> f64 + Send + Sync + 'static,
        weight: impl Fn(f64) -> f64 + Send + Sync + 'static,
        interval: (f64, f64),
    ) -> Result<Self, DistributionError> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(DistributionError::Domain(format!(
                "curve parameter interval [{a}, {b}] must be finite and non-empty"
            )));
        }
        Ok(Self {
            x: Arc::new(x),
            dx: Arc::new(dx),
            t: Arc::new(t),
            dt: Arc::new(dt),
            weight: Arc::new(weight),
            interval,
            time_parametrized: false,
        })
    }

    /// The ray `x = σs, t = s` for `s ≥ 0` with weight `w(s)`.
    pub fn ray(sigma: f64, weight: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            x: Arc::new(move |s| sigma * s),
            dx: Arc::new(move |_| sigma),
            t: Arc::new(|s| s),
            dt: Arc::new(|_| 1.0),
            weight: Arc::new(weight),
            interval: (0.0, f64::INFINITY),
            time_parametrized: true,
        }
    }

    pub fn point(&self, s: f64) -> (f64, f64) {
        ((self.x)(s), (self.t)(s))
    }

    pub fn weight(&self, s: f64) -> f64 {
        (self.weight)(s)
    }

    pub fn arclength_factor(&self, s: f64) -> f64 {
        (self.dx)(s).hypot((self.dt)(s))
    }

    /// Same curve with weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let w = self.weight.clone();
        Self {
            weight: Arc::new(move |s| c * w(s)),
            ..self.clone()
        }
    }

    /// Parameter range on which the curve can meet the support of `psi`.
    fn active_range(&self, psi: &TestBump) -> Option<(f64, f64)> {
        let (a, b) = self.interval;
        if self.time_parametrized {
            let (tlo, thi) = psi.t_support();
            let (lo, hi) = (a.max(tlo), b.min(thi));
            return (lo < hi).then_some((lo, hi));
        }
        const SAMPLES: usize = 2048;
        let (xlo, xhi) = psi.x_support();
        let (tlo, thi) = psi.t_support();
        let h = (b - a) / SAMPLES as f64;
        let mut first = None;
        let mut last = None;
        for i in 0..=SAMPLES {
            let s = a + i as f64 * h;
            let (x, t) = self.point(s);
            if x > xlo && x < xhi && t > tlo && t < thi {
                first.get_or_insert(i);
                last = Some(i);
            }
        }
        let (f, l) = (first?, last?);
        Some((a + f.saturating_sub(1) as f64 * h, (a + (l + 1) as f64 * h).min(b)))
    }
}

/// `∫ w(s) f(x(s), t(s)) |C′(s)| ds` restricted to the support of `psi`.
pub fn pair_curve_with(
    cd: &CurveDelta,
    psi: &TestBump,
    f: impl Fn(f64, f64) -> f64,
    tol: f64,
) -> Result<f64, DistributionError> {
    let Some((lo, hi)) = cd.active_range(psi) else {
        return Ok(0.0);
    };
    let integrand = |s: f64| {
        let (x, t) = cd.point(s);
        cd.weight(s) * f(x, t) * cd.arclength_factor(s)
    };
    let brk = breakpoints(lo, hi, (1..8).map(|i| lo + (hi - lo) * i as f64 / 8.0));
    Ok(Adaptive::with_abs_tol(tol).integrate_with_breaks(integrand, &brk)?.value)
}

/// `⟨w δ_C, ψ⟩`.
pub fn pair_curve(cd: &CurveDelta, psi: &TestBump) -> Result<f64, DistributionError> {
    pair_curve_with(cd, psi, |x, t| psi.value(x, t), PairingOptions::default().tol)
}

/// Quadrature settings for pairings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingOptions {
    /// Absolute tolerance for each pairing.
    pub tol: f64,
}

impl Default for PairingOptions {
    fn default() -> Self {
        Self { tol: 1e-11 }
    }
}

/// A locally integrable function of `(x, t)` plus weighted deltas on curves.
#[derive(Clone)]
pub struct DistributionDensity {
    smooth: FieldFn,
    /// Speeds `σ` of rays `x = σt` across which the smooth part may jump.
    jumps: Vec<f64>,
    /// Widths of boundary layers attached to the jump rays.
    layers: Vec<f64>,
    deltas: Vec<(CurveDelta, f64)>,
}

impl std::fmt::Debug for DistributionDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistributionDensity")
            .field("jumps", &self.jumps)
            .field("layers", &self.layers)
            .field("deltas", &self.deltas.len())
            .finish()
    }
}

impl DistributionDensity {
    pub fn new(smooth: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            smooth: Arc::new(smooth),
            jumps: Vec::new(),
            layers: Vec::new(),
            deltas: Vec::new(),
        }
    }

    pub fn with_jump_ray(mut self, sigma: f64) -> Self {
        self.jumps.push(sigma);
        self
    }

    /// Grades quadrature panels within `5·width` of every jump ray.
    pub fn with_layer(mut self, width: f64) -> Self {
        self.layers.push(width);
        self
    }

    pub fn with_delta(mut self, cd: CurveDelta) -> Self {
        self.deltas.push((cd, 1.0));
        self
    }

    pub fn smooth(&self, x: f64, t: f64) -> f64 {
        (self.smooth)(x, t)
    }

    pub fn deltas(&self) -> impl Iterator<Item = &CurveDelta> {
        self.deltas.iter().map(|(c, _)| c)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let h = self.smooth.clone();
        Self {
            smooth: Arc::new(move |x, t| c * h(x, t)),
            jumps: self.jumps.clone(),
            layers: self.layers.clone(),
            deltas: self.deltas.iter().map(|(d, f)| (d.clone(), c * f)).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let (h, g) = (self.smooth.clone(), other.smooth.clone());
        Self {
            smooth: Arc::new(move |x, t| h(x, t) + g(x, t)),
            jumps: self.jumps.iter().chain(&other.jumps).copied().collect(),
            layers: self.layers.iter().chain(&other.layers).copied().collect(),
            deltas: self.deltas.iter().chain(&other.deltas).cloned().collect(),
        }
    }

    /// `ρu` for a velocity that equals `u` off the curves and `on_curve` on them.
    pub fn times(&self, u: &ShockVelocity) -> Self {
        let (h, f) = (self.smooth.clone(), u.field.clone());
        Self {
            smooth: Arc::new(move |x, t| h(x, t) * f(x, t)),
            jumps: self.jumps.iter().copied().chain(u.jumps.iter().copied()).collect(),
            layers: self.layers.clone(),
            deltas: self
                .deltas
                .iter()
                .map(|(d, c)| (d.clone(), c * u.on_curve))
                .collect(),
        }
    }
}

/// A piecewise-smooth velocity with a prescribed value on the delta curves.
#[derive(Clone)]
pub struct ShockVelocity {
    field: FieldFn,
    on_curve: f64,
    jumps: Vec<f64>,
}

impl ShockVelocity {
    pub fn new(field: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, on_curve: f64) -> Self {
        Self {
            field: Arc::new(field),
            on_curve,
            jumps: Vec::new(),
        }
    }

    pub fn with_jump_ray(mut self, sigma: f64) -> Self {
        self.jumps.push(sigma);
        self
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        (self.field)(x, t)
    }

    pub fn on_curve(&self) -> f64 {
        self.on_curve
    }
}

/// Breakpoints in `x` at time `t`: each jump, graded at 1 and 5 layer widths on both sides.
fn x_breaks(psi: &TestBump, t: f64, jumps: &[f64], layers: &[f64]) -> Vec<f64> {
    let (lo, hi) = psi.x_support();
    let mut pts = Vec::new();
    for &sigma in jumps {
        let c = sigma * t;
        pts.push(c);
        for &w in layers {
            for m in [0.2, 1.0, 2.5, 5.0, 12.0] {
                pts.push(c - m * w);
                pts.push(c + m * w);
            }
        }
    }
    breakpoints(lo, hi, pts)
}

fn integrate_plane(
    psi: &TestBump,
    jumps: &[f64],
    layers: &[f64],
    f: impl Fn(f64, f64) -> f64 + Sync,
    tol: f64,
) -> Result<f64, DistributionError> {
    let (tlo, thi) = psi.t_support();
    let inner_tol = 0.25 * tol / (thi - tlo);
    let mut failure = None;
    let inner = |t: f64| -> f64 {
        let brk = x_breaks(psi, t, jumps, layers);
        match Adaptive::with_abs_tol(inner_tol).integrate_with_breaks(|x| f(x, t), &brk) {
            Ok(i) => i.value,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let mut inner = inner;
    // times at which a jump ray leaves the bump support
    let (xlo, xhi) = psi.x_support();
    let mut tb = Vec::new();
    for &sigma in jumps {
        if sigma != 0.0 {
            tb.push(xlo / sigma);
            tb.push(xhi / sigma);
        }
    }
    let brk = breakpoints(tlo, thi, tb.into_iter().chain((1..4).map(|i| tlo + (thi - tlo) * i as f64 / 4.0)));
    let result = Adaptive::with_abs_tol(0.5 * tol).integrate_with_breaks(&mut inner, &brk);
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(result?.value)
}

/// `⟨ρ, ∂ψ⟩`: the smooth part by region-split quadrature plus every delta by [`pair_curve_with`].
pub fn pair_density(
    rho: &DistributionDensity,
    psi: &TestBump,
    which: Derivative,
) -> Result<f64, DistributionError> {
    pair_density_with(rho, psi, which, PairingOptions::default())
}

pub fn pair_density_with(
    rho: &DistributionDensity,
    psi: &TestBump,
    which: Derivative,
    opts: PairingOptions,
) -> Result<f64, DistributionError> {
    let smooth = integrate_plane(
        psi,
        &rho.jumps,
        &rho.layers,
        |x, t| {
            let p = psi.eval(which, x, t);
            if p == 0.0 {
                0.0
            } else {
                rho.smooth(x, t) * p
            }
        },
        opts.tol,
    )?;
    let mut total = smooth;
    for (cd, c) in &rho.deltas {
        total += c * pair_curve_with(cd, psi, |x, t| psi.eval(which, x, t), 0.25 * opts.tol)?;
    }
    Ok(total)
}

/// `⟨ρ, ψ_t⟩ + ⟨ρu, ψ_x⟩`.
pub fn residual_transport(
    rho: &DistributionDensity,
    u: &ShockVelocity,
    psi: &TestBump,
) -> Result<f64, DistributionError> {
    let flux = rho.times(u);
    let a = pair_density(rho, psi, Derivative::T)?;
    let b = pair_density(&flux, psi, Derivative::X)?;
    Ok(a + b)
}

/// The delta-shock solution of the transport system for `d` as (density, velocity).
pub fn delta_shock_solution(d: &RiemannData) -> Result<(DistributionDensity, ShockVelocity), DistributionError> {
    let sol = classify(d)?;
    if sol.case != RiemannCase::DeltaShock {
        return Err(RiemannError::NotDeltaShock(sol.case).into());
    }
    Ok(shock_with_speed(&sol.data, sol.sigma, sol.u_delta))
}

/// Delta-shock ansatz for `d` placed on the ray `x = σ′t` with the weight the jump conditions would
/// assign to that ray, `w(t) = t([ρu] - σ′[ρ])/√(1+σ′²)`, carrying velocity `u_δ` on the ray.
/// With `σ′ = u_δ = (u_l+u_r)/2` this is the exact solution.
pub fn shock_with_speed(d: &RiemannData, sigma: f64, u_delta: f64) -> (DistributionDensity, ShockVelocity) {
    let d = *d;
    let rate = d.mass_rate(sigma) / (1.0 + sigma * sigma).sqrt();
    let rho = DistributionDensity::new(move |x, t| if x < sigma * t { d.rho_l } else { d.rho_r })
        .with_jump_ray(sigma)
        .with_delta(CurveDelta::ray(sigma, move |s| rate * s));
    let u = ShockVelocity::new(move |x, t| if x < sigma * t { d.u_l } else { d.u_r }, u_delta)
        .with_jump_ray(sigma);
    (rho, u)
}

/// Terms of the observable weak form for one test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableResidual {
    /// `⟨ρ,φ_t⟩`, `⟨ρū,φ_x⟩`, `⟨ρ̄(u-ū),φ_x⟩`, `⟨α²ρ̄_xū_x,φ_x⟩`.
    pub pairings: [f64; 4],
    /// `⟨ρ,φ_t⟩ + ⟨ρū,φ_x⟩`
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    pub total: f64,
}

impl ObservableResidual {
    pub fn largest_term(&self) -> f64 {
        self.term_i.abs().max(self.term_ii.abs()).max(self.term_iii.abs())
    }

    pub fn largest_pairing(&self) -> f64 {
        self.pairings.iter().fold(0.0f64, |m, p| m.max(p.abs()))
    }

    /// `|total| / max(|i|, |ii|, |iii|)`, zero when every term vanishes.
    pub fn relative(&self) -> f64 {
        let m = self.largest_term();
        if m > 0.0 {
            self.total.abs() / m
        } else {
            self.total.abs()
        }
    }
}

/// `⟨ρ,φ_t⟩ + ⟨ρū,φ_x⟩ + ⟨ρ̄(u-ū),φ_x⟩ + ⟨α²ρ̄_xū_x,φ_x⟩` for the delta-shock of `d` with the
/// Helmholtz filter. `ρ̄` is the filter of the bounded part of the density; the delta contributes
/// nothing to the third pairing because `u = ū = u_δ` on the shock.
pub fn residual_observable(
    d: &RiemannData,
    k: &Kernel,
    a: FilterScale,
    phi: &TestBump,
) -> Result<ObservableResidual, DistributionError> {
    residual_observable_with(d, k, a, phi, PairingOptions::default())
}

pub fn residual_observable_with(
    d: &RiemannData,
    k: &Kernel,
    a: FilterScale,
    phi: &TestBump,
    opts: PairingOptions,
) -> Result<ObservableResidual, DistributionError> {
    if k.family() != KernelFamily::Helmholtz {
        return Err(DistributionError::UnsupportedKernel(k.name().to_string()));
    }
    let profile = filtered_profile(d, k, a)?;
    let sigma = profile.sigma();
    let u_delta = profile.u_delta();
    let alpha = a.alpha();
    let rate = classify(d)?.weight_rate;
    let data = *profile.data();
    let rho = move |x: f64, t: f64| if x < sigma * t { data.rho_l } else { data.rho_r };
    let u = move |x: f64, t: f64| if x < sigma * t { data.u_l } else { data.u_r };
    let jumps = [sigma];
    let layers = [alpha];
    let plane = |f: &(dyn Fn(f64, f64) -> f64 + Sync)| {
        integrate_plane(phi, &jumps, &layers, |x, t| {
            if phi.value(x, t) == 0.0 { 0.0 } else { f(x, t) }
        }, opts.tol)
    };
    let ray = CurveDelta::ray(sigma, move |s| rate * s);
    let p1 = plane(&|x, t| rho(x, t) * phi.d_t(x, t))?
        + pair_curve_with(&ray, phi, |x, t| phi.d_t(x, t), 0.25 * opts.tol)?;
    let p2 = plane(&|x, t| rho(x, t) * profile.ubar(x, t) * phi.d_x(x, t))?
        + u_delta * pair_curve_with(&ray, phi, |x, t| phi.d_x(x, t), 0.25 * opts.tol)?;
    let p3 = plane(&|x, t| profile.rhobar_smooth(x, t) * (u(x, t) - profile.ubar(x, t)) * phi.d_x(x, t))?;
    let p4 = plane(&|x, t| alpha * alpha * profile.rhobar_x(x, t) * profile.ubar_x(x, t) * phi.d_x(x, t))?;
    let term_i = p1 + p2;
    Ok(ObservableResidual {
        pairings: [p1, p2, p3, p4],
        term_i,
        term_ii: p3,
        term_iii: p4,
        total: term_i + p3 + p4,
    })
}

/// `count` bumps whose supports straddle the ray `x = σt`: the first is centred on the ray, the
/// rest are offset by up to half their `x`-radius. Centres have `t₀ ∈ [1, 2]`, radii lie in
/// `[0.2, 1]` (the time radius is capped so the support stays in `t > 0.05`).
pub fn bump_suite(sigma: f64, seed: u64, count: usize) -> Vec<TestBump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let t0: f64 = rng.gen_range(1.0..=2.0);
            let rt: f64 = rng.gen_range(0.2..=(t0 - 0.05).min(1.0));
            let rx: f64 = rng.gen_range(0.2..=1.0);
            let offset: f64 = if i == 0 { 0.0 } else { rng.gen_range(-0.5..=0.5) * rx };
            TestBump {
                x0: sigma * t0 + offset,
                t0,
                rx,
                rt,
            }
        })
        .collect()
}

/// Observable residuals for a whole suite, evaluated in parallel.
pub fn residual_suite(
    d: &RiemannData,
    k: &Kernel,
    a: FilterScale,
    bumps: &[TestBump],
) -> Result<Vec<ObservableResidual>, DistributionError> {
    bumps
        .par_iter()
        .map(|b| residual_observable(d, k, a, b))
        .collect()
}

/// CSV `bump_id,term_i,term_ii,term_iii,total`.
pub fn write_residual_report<W: Write>(mut w: W, rows: &[ObservableResidual]) -> io::Result<()> {
    writeln!(w, "bump_id,term_i,term_ii,term_iii,total")?;
    for (i, r) in rows.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{},{}",
            fmt_real(r.term_i),
            fmt_real(r.term_ii),
            fmt_real(r.term_iii),
            fmt_real(r.total)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn bump() -> TestBump {
        TestBump::new(1.0, 1.0, 0.5, 0.5).unwrap()
    }

    #[test]
    fn bump_rejects_bad_supports() {
        assert!(TestBump::new(0.0, 1.0, 0.0, 0.5).is_err());
        assert!(TestBump::new(0.0, 0.4, 0.3, 0.5).is_err());
        assert!(TestBump::new(0.0, f64::NAN, 0.3, 0.5).is_err());
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = TestBump::new(0.3, 1.4, 0.7, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..100 {
            let x = rng.gen_range(-0.4..1.0);
            let t = rng.gen_range(0.8..2.0);
            let fx = (b.value(x + h, t) - b.value(x - h, t)) / (2.0 * h);
            let ft = (b.value(x, t + h) - b.value(x, t - h)) / (2.0 * h);
            assert_abs_diff_eq!(fx, b.d_x(x, t), epsilon = 1e-6);
            assert_abs_diff_eq!(ft, b.d_t(x, t), epsilon = 1e-6);
        }
    }

    #[test]
    fn curve_pairings() {
        let psi = bump();
        assert_eq!(pair_curve(&CurveDelta::ray(1.0, |_| 0.0), &psi).unwrap(), 0.0);
        let far = CurveDelta::ray(-3.0, |s| s);
        assert!(pair_curve(&far, &psi).unwrap().abs() < 1e-12);
        let ray = CurveDelta::ray(1.0, |s| 2f64.sqrt() * s);
        let oracle = Adaptive::with_abs_tol(1e-13)
            .integrate(|s| 2.0 * s * psi.value(s, s), 0.5, 1.5)
            .unwrap()
            .value;
        assert_abs_diff_eq!(pair_curve(&ray, &psi).unwrap(), oracle, epsilon = 1e-10);
    }

    #[test]
    fn general_parametrization_matches_ray() {
        let psi = bump();
        // same ray, parametrized by arclength-like s = 2t
        let general = CurveDelta::new(|s| 0.5 * s, |_| 0.5, |s| 0.5 * s, |_| 0.5, |s| 0.5 * s, (0.0, 10.0)).unwrap();
        let ray = CurveDelta::ray(1.0, |s| s);
        // |C'| halves, ds doubles
        assert_abs_diff_eq!(
            pair_curve(&general, &psi).unwrap(),
            pair_curve(&ray, &psi).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn smooth_pairing_matches_plain_quadrature() {
        let psi = bump();
        let one = DistributionDensity::new(|_, _| 1.0);
        let v = pair_density(&one, &psi, Derivative::Value).unwrap();
        let oracle = Adaptive::with_abs_tol(1e-13)
            .integrate(
                |t| {
                    Adaptive::with_abs_tol(1e-14)
                        .integrate(|x| psi.value(x, t), 0.5, 1.5)
                        .unwrap()
                        .value
                },
                0.5,
                1.5,
            )
            .unwrap()
            .value;
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-11);
    }

    #[test]
    fn delta_against_time_derivative() {
        let psi = TestBump::new(0.0, 1.0, 0.4, 0.5).unwrap();
        let rho = DistributionDensity::new(|_, _| 0.0).with_delta(CurveDelta::ray(0.0, |s| s));
        let v = pair_density(&rho, &psi, Derivative::T).unwrap();
        let oracle = Adaptive::with_abs_tol(1e-13)
            .integrate(|t| t * psi.d_t(0.0, t), 0.5, 1.5)
            .unwrap()
            .value;
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-10);
        // by parts: -∫ψ(0,t)dt
        let by_parts = -Adaptive::with_abs_tol(1e-13)
            .integrate(|t| psi.value(0.0, t), 0.5, 1.5)
            .unwrap()
            .value;
        assert_abs_diff_eq!(v, by_parts, epsilon = 1e-10);
    }

    #[test]
    fn linearity() {
        let psi = TestBump::new(0.9, 1.2, 0.6, 0.7).unwrap();
        let d = RiemannData::new(1.0, 2.0, 3.0, 0.0).unwrap();
        let (a, _) = delta_shock_solution(&d).unwrap();
        let b = DistributionDensity::new(|x, t| (x - t).sin());
        let pa = pair_density(&a, &psi, Derivative::X).unwrap();
        let pb = pair_density(&b, &psi, Derivative::X).unwrap();
        let sum = pair_density(&a.plus(&b), &psi, Derivative::X).unwrap();
        assert!((sum - pa - pb).abs() <= 1e-10 * (pa.abs() + pb.abs()).max(1e-3));
        let scaled = pair_density(&a.scaled(-2.5), &psi, Derivative::X).unwrap();
        assert!((scaled + 2.5 * pa).abs() <= 1e-10 * pa.abs().max(1e-3));
    }

    #[test]
    fn constant_state_is_a_solution() {
        let rho = DistributionDensity::new(|_, _| 1.0);
        let u = ShockVelocity::new(|_, _| 0.8, 0.8);
        for b in bump_suite(0.3, 11, 5) {
            assert!(residual_transport(&rho, &u, &b).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn exact_delta_shock_residual() {
        let d = RiemannData::new(1.0, 2.0, 1.0, 0.0).unwrap();
        let (rho, u) = delta_shock_solution(&d).unwrap();
        for b in bump_suite(1.0, 3, 4) {
            assert!(residual_transport(&rho, &u, &b).unwrap().abs() <= 1e-8);
        }
    }

    #[test]
    fn observable_rejects_other_kernels() {
        let d = RiemannData::new(1.0, 2.0, 1.0, 0.0).unwrap();
        let a = FilterScale::new(0.1).unwrap();
        assert!(matches!(
            residual_observable(&d, &Kernel::gaussian(), a, &bump()),
            Err(DistributionError::UnsupportedKernel(_))
        ));
    }

    #[test]
    fn observable_terms_vanish_far_from_the_shock() {
        let d = RiemannData::new(1.0, 2.0, 2.0, 0.0).unwrap();
        let a = FilterScale::new(0.05).unwrap();
        let far = TestBump::new(4.0, 1.0, 0.5, 0.5).unwrap();
        let r = residual_observable(&d, &Kernel::helmholtz(), a, &far).unwrap();
        assert!(r.term_ii.abs() < 1e-12 && r.term_iii.abs() < 1e-12);
        assert!(r.term_i.abs() < 1e-10);
    }

    #[test]
    fn observable_cancellation_example() {
        let d = RiemannData::new(1.0, 2.0, 1.0, 0.0).unwrap();
        let b = TestBump::new(1.0, 1.0, 0.8, 0.6).unwrap();
        let r = residual_observable(&d, &Kernel::helmholtz(), FilterScale::new(0.1).unwrap(), &b).unwrap();
        assert!(r.total.abs() <= 1e-7, "{r:?}");
        assert!(r.largest_pairing() > 0.1);
    }

    #[test]
    fn suite_is_reproducible_and_straddles() {
        let a = bump_suite(1.0, 42, 10);
        assert_eq!(a, bump_suite(1.0, 42, 10));
        for b in &a {
            let (lo, hi) = b.x_support();
            assert!(lo < b.t0 && b.t0 < hi);
            assert!(b.t0 - b.rt > 0.0);
            assert!((0.2..=1.0).contains(&b.rx) && (0.2..=1.0).contains(&b.rt));
        }
        assert_eq!(a[0].x0, a[0].t0);
    }

    #[test]
    fn report_csv() {
        let r = ObservableResidual { pairings: [0.0; 4], term_i: 1.0, term_ii: -1.0, term_iii: 0.0, total: 0.0 };
        let mut buf = Vec::new();
        write_residual_report(&mut buf, &[r, r]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("bump_id,term_i,term_ii,term_iii,total\n0,"));
        assert_eq!(s.lines().count(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn delta_shock_satisfies_the_unfiltered_weak_form(
            rl in 0.1f64..3.0, rr in 0.1f64..3.0, ul in -2.0f64..2.0, gap in 0.1f64..3.0, seed in 0u64..1000,
        ) {
            let d = RiemannData::new(rl, ul, rr, ul - gap).unwrap();
            let (rho, u) = delta_shock_solution(&d).unwrap();
            let sigma = classify(&d).unwrap().sigma;
            for b in bump_suite(sigma, seed, 2) {
                prop_assert!(residual_transport(&rho, &u, &b).unwrap().abs() <= 1e-8);
            }
        }
    }
}
