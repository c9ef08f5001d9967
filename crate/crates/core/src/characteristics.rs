//! Lagrangian particle maps of the filtered velocity, map inversion, and the unfiltered
//! blow-up and density formulas used as small-α oracles.
//!
//! Each particle carries its initial velocity `u₀(s)` unchanged and moves with the filtered
//! velocity `ū`, obtained by convolving the piecewise-linear reconstruction of the particle
//! velocities (constant beyond the outermost particles) with `g^α`.

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::initial::Profile;
use crate::kernels::{FilterScale, Kernel};
use crate::output::fmt_real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharacteristicsError {
    #[error("particles {index} and {} crossed at t = {time}", index + 1)]
    Crossing { time: f64, index: usize },
    #[error("advection needs at least 64 particles, got {0}")]
    TooFewParticles(usize),
    #[error("time step {dt} exceeds the stability limit {limit} (alpha / (4 max|u0|))")]
    TimeStep { dt: f64, limit: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("characteristic through s = {s} has blown up by t = {t} (1 + u0'(s) t = {factor})")]
    Blowup { s: f64, t: f64, factor: f64 },
    #[error("x = {x} lies outside the particle hull [{lo}, {hi}]")]
    OutsideHull { x: f64, lo: f64, hi: f64 },
    #[error("t = {0} is not a stored snapshot")]
    UnknownSnapshot(f64),
    #[error("non-finite velocity at t = {0}")]
    NonFinite(f64),
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smooth initial data `(ρ₀, u₀)` on a bounded interval.
#[derive(Clone)]
pub struct SmoothIC {
    u0: RealFn,
    du0: Option<RealFn>,
    rho0: RealFn,
    drho0: Option<RealFn>,
    domain: (f64, f64),
}

impl std::fmt::Debug for SmoothIC {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothIC")
            .field("domain", &self.domain)
            .field("analytic_du0", &self.du0.is_some())
            .finish()
    }
}

fn central_difference(f: &RealFn, s: f64) -> f64 {
    let h = 1e-5 * (1.0 + s.abs());
    (f(s + h) - f(s - h)) / (2.0 * h)
}

impl SmoothIC {
    pub fn new(
        u0: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rho0: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> Result<Self, CharacteristicsError> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CharacteristicsError::Invalid(format!(
                "domain [{lo}, {hi}] is empty or unbounded"
            )));
        }
        Ok(Self {
            u0: Arc::new(u0),
            du0: None,
            rho0: Arc::new(rho0),
            drho0: None,
            domain,
        })
    }

    /// Initial data from two profiles, with their analytic derivatives.
    pub fn from_profiles(
        u0: Profile,
        rho0: Profile,
        domain: (f64, f64),
    ) -> Result<Self, CharacteristicsError> {
        Ok(Self::new(move |s| u0.value(s), move |s| rho0.value(s), domain)?
            .with_u0_derivative(move |s| u0.derivative(s))
            .with_rho0_derivative(move |s| rho0.derivative(s)))
    }

    pub fn with_u0_derivative(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.du0 = Some(Arc::new(f));
        self
    }

    pub fn with_rho0_derivative(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.drho0 = Some(Arc::new(f));
        self
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn u0(&self, s: f64) -> f64 {
        (self.u0)(s)
    }

    pub fn rho0(&self, s: f64) -> f64 {
        (self.rho0)(s)
    }

    /// `u₀′(s)`, analytic if supplied, otherwise a central difference.
    pub fn du0(&self, s: f64) -> f64 {
        match &self.du0 {
            Some(f) => f(s),
            None => central_difference(&self.u0, s),
        }
    }

    pub fn drho0(&self, s: f64) -> f64 {
        match &self.drho0 {
            Some(f) => f(s),
            None => central_difference(&self.rho0, s),
        }
    }
}

/// Filtered velocity at `x` of the field that is piecewise linear through `(pos[i], vel[i])` and
/// constant beyond the ends. `kernel` must already be scaled.
pub fn reconstructed_filtered_velocity(kernel: &Kernel, pos: &[f64], vel: &[f64], x: f64) -> f64 {
    let n = pos.len();
    debug_assert!(n >= 2 && vel.len() == n);
    let r = kernel.truncation_radius();
    let scale = kernel.scale();
    let mut total = vel[0] * kernel.upper_tail(x - pos[0]) + vel[n - 1] * kernel.cdf(x - pos[n - 1]);
    // first node whose right segment can reach the window, last node whose left one can
    let lo = pos.partition_point(|&p| p < x - r).saturating_sub(1);
    let hi = (pos.partition_point(|&p| p <= x + r) + 1).min(n);
    if hi <= lo + 1 {
        return total;
    }
    let z: Vec<f64> = pos[lo..hi].iter().map(|&p| x - p).collect();
    let cdf: Vec<f64> = z.iter().map(|&z| kernel.cdf(z)).collect();
    let moment: Vec<f64> = z.iter().map(|&z| kernel.first_moment(z)).collect();
    for j in 0..z.len() - 1 {
        let (a, b) = (pos[lo + j], pos[lo + j + 1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let um = 0.5 * (vel[lo + j] + vel[lo + j + 1]);
        // kernel mass over the segment, seen from x
        let dc = if z[j + 1] >= 0.0 {
            kernel.upper_tail(z[j + 1]) - kernel.upper_tail(z[j])
        } else {
            cdf[j] - cdf[j + 1]
        };
        if h < 1e-4 * scale {
            total += um * dc;
        } else {
            let slope = (vel[lo + j + 1] - vel[lo + j]) / h;
            let dm = moment[j] - moment[j + 1];
            total += (um + slope * (x - mid)) * dc - slope * dm;
        }
    }
    total
}

/// Particle trajectories `φ_t(s_i)` stored at every time step.
#[derive(Debug, Clone)]
pub struct LagrangianMap {
    seeds: Vec<f64>,
    velocities: Vec<f64>,
    times: Vec<f64>,
    positions: Vec<Vec<f64>>,
    jacobians: Vec<Vec<f64>>,
    kernel: Kernel,
}

fn jacobian_estimate(seeds: &[f64], pos: &[f64]) -> Vec<f64> {
    let n = seeds.len();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (pos[b] - pos[a]) / (seeds[b] - seeds[a])
        })
        .collect()
}

impl LagrangianMap {
    pub fn seeds(&self) -> &[f64] {
        &self.seeds
    }

    /// Velocities carried by the particles, `u₀(s_i)`.
    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self, snapshot: usize) -> &[f64] {
        &self.positions[snapshot]
    }

    /// Finite-difference estimates of `∂φ_t/∂s` at the seeds.
    pub fn jacobians(&self, snapshot: usize) -> &[f64] {
        &self.jacobians[snapshot]
    }

    /// The scaled kernel that drove the advection.
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn snapshot_count(&self) -> usize {
        self.times.len()
    }

    pub fn snapshot_index(&self, t: f64) -> Result<usize, CharacteristicsError> {
        let tol = 1e-12 * t.abs().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        if i < self.times.len() && (self.times[i] - t).abs() <= tol {
            Ok(i)
        } else {
            Err(CharacteristicsError::UnknownSnapshot(t))
        }
    }

    /// Smallest spacing between neighbouring particles over all snapshots.
    pub fn min_gap(&self) -> f64 {
        self.positions
            .iter()
            .flat_map(|p| p.windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `φ_t(s)` for any `s` in the seed hull, by linear interpolation between particles.
    pub fn position_at(&self, snapshot: usize, s: f64) -> f64 {
        interpolate(&self.seeds, &self.positions[snapshot], s)
    }

    /// `ū(x, t)` at a snapshot, from the particle reconstruction.
    pub fn filtered_velocity(&self, snapshot: usize, x: f64) -> f64 {
        reconstructed_filtered_velocity(&self.kernel, &self.positions[snapshot], &self.velocities, x)
    }

    /// Long-format CSV `t,s,x,u0`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,s,x,u0")?;
        for (k, t) in self.times.iter().enumerate() {
            for (i, s) in self.seeds.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt_real(*t),
                    fmt_real(*s),
                    fmt_real(self.positions[k][i]),
                    fmt_real(self.velocities[i])
                )?;
            }
        }
        Ok(())
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x).min(n - 1).max(1) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}

/// Moves `n_particles` equally spaced particles over the initial-data domain with the filtered
/// velocity, using classical fourth-order Runge–Kutta up to `t_end`.
pub fn advect(
    ic: &SmoothIC,
    k: &Kernel,
    a: FilterScale,
    t_end: f64,
    dt: f64,
    n_particles: usize,
) -> Result<LagrangianMap, CharacteristicsError> {
    if n_particles < 64 {
        return Err(CharacteristicsError::TooFewParticles(n_particles));
    }
    if !(t_end.is_finite() && t_end >= 0.0) || !(dt.is_finite() && dt > 0.0) {
        return Err(CharacteristicsError::Invalid(format!(
            "need t_end >= 0 and dt > 0, got t_end = {t_end}, dt = {dt}"
        )));
    }
    let (lo, hi) = ic.domain();
    let h = (hi - lo) / (n_particles - 1) as f64;
    let seeds: Vec<f64> = (0..n_particles).map(|i| lo + i as f64 * h).collect();
    let velocities: Vec<f64> = seeds.iter().map(|&s| ic.u0(s)).collect();
    if let Some(t) = velocities.iter().find(|v| !v.is_finite()) {
        return Err(CharacteristicsError::Invalid(format!("u0 is not finite ({t})")));
    }
    let umax = velocities.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = a.alpha() / (4.0 * umax);
    if dt > limit * (1.0 + 1e-12) {
        return Err(CharacteristicsError::TimeStep { dt, limit });
    }
    let kernel = k.scaled(a);
    let steps = (t_end / dt).ceil() as usize;
    let dt = if steps > 0 { t_end / steps as f64 } else { 0.0 };

    let rate = |pos: &[f64]| -> Vec<f64> {
        pos.par_iter()
            .map(|&x| reconstructed_filtered_velocity(&kernel, pos, &velocities, x))
            .collect()
    };
    let axpy = |p: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        p.iter().zip(k).map(|(p, k)| p + c * k).collect()
    };

    let mut times = vec![0.0];
    let mut positions = vec![seeds.clone()];
    let mut jacobians = vec![jacobian_estimate(&seeds, &seeds)];
    let mut p = seeds.clone();
    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * dt;
        let k1 = rate(&p);
        let k2 = rate(&axpy(&p, &k1, 0.5 * dt));
        let k3 = rate(&axpy(&p, &k2, 0.5 * dt));
        let k4 = rate(&axpy(&p, &k3, dt));
        for i in 0..p.len() {
            p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * dt;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(CharacteristicsError::NonFinite(t_prev));
        }
        if let Some(index) = p.windows(2).position(|w| w[1] <= w[0]) {
            return Err(CharacteristicsError::Crossing { time: t, index });
        }
        times.push(t);
        jacobians.push(jacobian_estimate(&seeds, &p));
        positions.push(p.clone());
    }
    Ok(LagrangianMap {
        seeds,
        velocities,
        times,
        positions,
        jacobians,
        kernel,
    })
}

/// Seed `s` with `φ_t(s) = x`. Inside a cluster of particles whose positions agree to within
/// `1e-12` the left-most seed is returned.
pub fn invert_map(m: &LagrangianMap, x: f64, t: f64) -> Result<f64, CharacteristicsError> {
    let k = m.snapshot_index(t)?;
    let pos = &m.positions[k];
    let n = pos.len();
    let (lo, hi) = (pos[0], pos[n - 1]);
    if !(x >= lo && x <= hi) {
        return Err(CharacteristicsError::OutsideHull { x, lo, hi });
    }
    let mut i = pos.partition_point(|&p| p <= x).clamp(1, n - 1) - 1;
    while i > 0 && (pos[i] - pos[i - 1]).abs() <= 1e-12 && (x - pos[i]).abs() <= 1e-12 {
        i -= 1;
    }
    let gap = pos[i + 1] - pos[i];
    if gap <= 1e-12 {
        return Ok(m.seeds[i]);
    }
    let w = ((x - pos[i]) / gap).clamp(0.0, 1.0);
    Ok(m.seeds[i] + w * (m.seeds[i + 1] - m.seeds[i]))
}

/// `u(x, t) = u₀(φ_t⁻¹(x))` at a snapshot.
pub fn velocity_from_map(m: &LagrangianMap, ic: &SmoothIC, x: f64, t: f64) -> Result<f64, CharacteristicsError> {
    Ok(ic.u0(invert_map(m, x, t)?))
}

/// Earliest crossing time `inf −1/u₀′(s)` of the unfiltered characteristics, `+∞` if `u₀` is
/// non-decreasing.
pub fn blowup_time(ic: &SmoothIC) -> f64 {
    const SAMPLES: usize = 4096;
    let (lo, hi) = ic.domain();
    let h = (hi - lo) / (SAMPLES - 1) as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..SAMPLES {
        let d = ic.du0(lo + i as f64 * h);
        if d < best {
            best = d;
            best_i = i;
        }
    }
    if !(best < 0.0) {
        return f64::INFINITY;
    }
    let a = lo + best_i.saturating_sub(1) as f64 * h;
    let b = (lo + (best_i + 1) as f64 * h).min(hi);
    let (_, refined) = golden_section_min(|s| ic.du0(s), a, b, 1e-12);
    -1.0 / refined.min(best)
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let s = 0.5 * (a + b);
    (s, f(s))
}

fn compression_factor(ic: &SmoothIC, s: f64, t: f64) -> Result<(f64, f64), CharacteristicsError> {
    let d = ic.du0(s);
    let factor = 1.0 + d * t;
    if factor <= 0.0 {
        return Err(CharacteristicsError::Blowup { s, t, factor });
    }
    Ok((d, factor))
}

/// Unfiltered density `ρ₀(s)/(1 + u₀′(s)t)` on the characteristic from `s`.
pub fn density_on_characteristic(ic: &SmoothIC, s: f64, t: f64) -> Result<f64, CharacteristicsError> {
    let (_, factor) = compression_factor(ic, s, t)?;
    Ok(ic.rho0(s) / factor)
}

/// Unfiltered velocity gradient `u₀′(s)/(1 + u₀′(s)t)` on the characteristic from `s`.
pub fn velocity_gradient_on_characteristic(ic: &SmoothIC, s: f64, t: f64) -> Result<f64, CharacteristicsError> {
    let (d, factor) = compression_factor(ic, s, t)?;
    Ok(d / factor)
}
