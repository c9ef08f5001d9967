//! Broad solutions of the observable continuity equation `ρ_t + ūρ_x = -ρ̄u_x` for a given
//! velocity, by Picard iteration of the integral operator
//! `Tρ(ξ,τ) = ρ₀(x(0;ξ,τ)) - ∫₀^τ ρ̄ u_x (x(t;ξ,τ), t) dt` along backward characteristics
//! `dx/dt = ū`.
//!
//! Fields are sampled on a tensor grid over `Ω_target × [0, T]`. Backward paths are precomputed
//! once; each application of `T` filters every time row (constant extension) and integrates along
//! the stored paths with the trapezoidal rule.

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::characteristics::{invert_map, LagrangianMap, SmoothIC};
use crate::kernels::{convolve, Boundary, FilterScale, Kernel, KernelError, SampledField, UniformGrid};
use crate::output::fmt_real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BroadError {
    #[error("domain of determinacy is empty: [{lo}, {hi}] shrunk by {inset}")]
    DomainTooSmall { lo: f64, hi: f64, inset: f64 },
    #[error("characteristic from ({xi}, {tau}) leaves [{lo}, {hi}]")]
    Determinacy { xi: f64, tau: f64, lo: f64, hi: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e}, ratios {ratios:?})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        ratios: Vec<f64>,
    },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A solved velocity: its filtered part `ū` (the characteristic speed) and `u_x`.
pub trait VelocityField: Send + Sync {
    fn ubar(&self, x: f64, t: f64) -> f64;

    fn u_x(&self, x: f64, t: f64) -> f64;

    /// Backward characteristic from `(xi, t_k)` sampled at `t_k, t_{k-1}, …, t_0`, returned in
    /// increasing time order. Classical Runge–Kutta with `substeps` steps per interval.
    fn trace_back(&self, xi: f64, times: &[f64], k: usize, substeps: usize) -> Vec<f64> {
        let mut path = vec![0.0; k + 1];
        path[k] = xi;
        let mut x = xi;
        for m in (0..k).rev() {
            let h = (times[m] - times[m + 1]) / substeps as f64;
            let mut t = times[m + 1];
            for _ in 0..substeps {
                let k1 = self.ubar(x, t);
                let k2 = self.ubar(x + 0.5 * h * k1, t + 0.5 * h);
                let k3 = self.ubar(x + 0.5 * h * k2, t + 0.5 * h);
                let k4 = self.ubar(x + h * k3, t + h);
                x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                t += h;
            }
            path[m] = x;
        }
        path
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantVelocity(pub f64);

impl VelocityField for ConstantVelocity {
    fn ubar(&self, _x: f64, _t: f64) -> f64 {
        self.0
    }

    fn u_x(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    fn trace_back(&self, xi: f64, times: &[f64], k: usize, _substeps: usize) -> Vec<f64> {
        (0..=k).map(|m| xi - self.0 * (times[k] - times[m])).collect()
    }
}

type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Velocity given by closed forms for `ū` and `u_x`.
#[derive(Clone)]
pub struct AnalyticVelocity {
    ubar: FieldFn,
    u_x: FieldFn,
}

impl AnalyticVelocity {
    pub fn new(
        ubar: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        u_x: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            ubar: Arc::new(ubar),
            u_x: Arc::new(u_x),
        }
    }

    /// `u = x/(1+t)`. Filtering leaves affine functions unchanged, so `ū = u` and this solves
    /// `u_t + ūu_x = 0` for every α. The unfiltered density is `ρ₀(x/(1+t))/(1+t)`.
    pub fn expanding() -> Self {
        Self::new(|x, t| x / (1.0 + t), |_, t| 1.0 / (1.0 + t))
    }
}

impl VelocityField for AnalyticVelocity {
    fn ubar(&self, x: f64, t: f64) -> f64 {
        (self.ubar)(x, t)
    }

    fn u_x(&self, x: f64, t: f64) -> f64 {
        (self.u_x)(x, t)
    }
}

/// Velocity tabulated from a particle map: `ū` from the particle reconstruction and
/// `u_x = u₀′(s)/∂_sφ_t(s)`, linear in `x` between table nodes and in `t` between snapshots.
#[derive(Debug, Clone)]
pub struct MapVelocity {
    grid: UniformGrid,
    times: Vec<f64>,
    ubar: Vec<Vec<f64>>,
    u_x: Vec<Vec<f64>>,
}

impl MapVelocity {
    pub fn new(map: &LagrangianMap, ic: &SmoothIC, grid: UniformGrid) -> Result<Self, BroadError> {
        let times = map.times().to_vec();
        let xs = grid.points();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..times.len())
            .into_par_iter()
            .map(|k| {
                let pos = map.positions(k);
                let (lo, hi) = (pos[0], pos[pos.len() - 1]);
                let jac = map.jacobians(k);
                let ub = xs.iter().map(|&x| map.filtered_velocity(k, x)).collect();
                let ux = xs
                    .iter()
                    .map(|&x| {
                        let xc = x.clamp(lo, hi);
                        let s = invert_map(map, xc, times[k]).unwrap_or(ic.domain().0);
                        let j = lerp_table(map.seeds(), jac, s);
                        if x < lo || x > hi {
                            0.0
                        } else {
                            ic.du0(s) / j
                        }
                    })
                    .collect();
                (ub, ux)
            })
            .collect();
        let (ubar, u_x) = rows.into_iter().unzip();
        Ok(Self {
            grid,
            times,
            ubar,
            u_x,
        })
    }

    fn sample(&self, table: &[Vec<f64>], x: f64, t: f64) -> f64 {
        let n = self.times.len();
        let row = |k: usize| lerp_grid(&self.grid, &table[k], x);
        if n == 1 || t <= self.times[0] {
            return row(0);
        }
        if t >= self.times[n - 1] {
            return row(n - 1);
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        row(k) * (1.0 - w) + row(k + 1) * w
    }
}

impl VelocityField for MapVelocity {
    fn ubar(&self, x: f64, t: f64) -> f64 {
        self.sample(&self.ubar, x, t)
    }

    fn u_x(&self, x: f64, t: f64) -> f64 {
        self.sample(&self.u_x, x, t)
    }
}

fn lerp_table(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}

fn lerp_grid(grid: &UniformGrid, ys: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if x <= grid.first() {
        return ys[0];
    }
    if x >= grid.last() {
        return ys[n - 1];
    }
    let s = (x - grid.first()) / grid.dx();
    let i = (s.floor() as usize).min(n - 2);
    let w = s - i as f64;
    ys[i] * (1.0 - w) + ys[i + 1] * w
}

/// Result of tracing characteristics backwards from the edges of `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub traced: usize,
    pub contained: usize,
    /// Smallest distance from a traced path to the edge of `Ω_target`.
    pub min_margin: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.traced == self.contained
    }
}

/// `Ω × [0, T]` with `Ω` inset from `Ω_target` by `T·max|ū|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainOfDeterminacy {
    pub omega_target: (f64, f64),
    pub omega: (f64, f64),
    pub t_end: f64,
    pub max_speed: f64,
    pub certificate: Certificate,
}

impl DomainOfDeterminacy {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.omega.0 && x <= self.omega.1
    }
}

fn max_speed(u: &dyn VelocityField, omega: (f64, f64), t_end: f64) -> f64 {
    let (nx, nt) = (201, 51);
    let mut m = 0.0f64;
    for i in 0..nx {
        let x = omega.0 + (omega.1 - omega.0) * i as f64 / (nx - 1) as f64;
        for k in 0..nt {
            let t = t_end * k as f64 / (nt - 1) as f64;
            m = m.max(u.ubar(x, t).abs());
        }
    }
    m
}

pub fn build_domain(
    u: &dyn VelocityField,
    omega_target: (f64, f64),
    t_end: f64,
) -> Result<DomainOfDeterminacy, BroadError> {
    let (lo, hi) = omega_target;
    if !(lo < hi && t_end.is_finite() && t_end >= 0.0) {
        return Err(BroadError::Invalid(format!(
            "need lo < hi and T >= 0, got [{lo}, {hi}], T = {t_end}"
        )));
    }
    let speed = max_speed(u, omega_target, t_end);
    let inset = t_end * speed;
    let omega = (lo + inset, hi - inset);
    if omega.0 >= omega.1 {
        return Err(BroadError::DomainTooSmall { lo, hi, inset });
    }
    const PER_SIDE: usize = 25;
    let mut traced = 0;
    let mut contained = 0;
    let mut min_margin = f64::INFINITY;
    for &xi in &[omega.0, omega.1] {
        for j in 1..=PER_SIDE {
            let tau = t_end * j as f64 / PER_SIDE as f64;
            let steps = 32;
            let times: Vec<f64> = (0..=steps).map(|m| tau * m as f64 / steps as f64).collect();
            let path = u.trace_back(xi, &times, steps, 4);
            traced += 1;
            let margin = path
                .iter()
                .map(|&x| (x - lo).min(hi - x))
                .fold(f64::INFINITY, f64::min);
            min_margin = min_margin.min(margin);
            if margin >= -1e-12 * (1.0 + lo.abs().max(hi.abs())) {
                contained += 1;
            }
        }
    }
    Ok(DomainOfDeterminacy {
        omega_target,
        omega,
        t_end,
        max_speed: speed,
        certificate: Certificate {
            traced,
            contained,
            min_margin,
        },
    })
}

/// Space-time samples, one row per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub grid: UniformGrid,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn from_fn(grid: UniformGrid, times: &[f64], f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = grid.points();
        let rows = times
            .iter()
            .map(|&t| xs.iter().map(|&x| f(x, t)).collect())
            .collect();
        Self {
            grid,
            times: times.to_vec(),
            rows,
        }
    }

    pub fn difference(&self, other: &Self) -> Self {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| a - b).collect())
            .collect();
        Self {
            grid: self.grid,
            times: self.times.clone(),
            rows,
        }
    }

    /// Linear interpolation in `x` on the row of time level `k`.
    pub fn at(&self, k: usize, x: f64) -> f64 {
        lerp_grid(&self.grid, &self.rows[k], x)
    }
}

/// `max e^{-2Lt}|v(x,t)|` over the samples.
pub fn weighted_norm(v: &SpaceTimeField, lipschitz: f64) -> f64 {
    v.times
        .iter()
        .zip(&v.rows)
        .map(|(t, row)| {
            let w = (-2.0 * lipschitz * t).exp();
            row.iter().fold(0.0f64, |m, x| m.max(w * x.abs()))
        })
        .fold(0.0, f64::max)
}

/// Sampling parameters for the Picard iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadGrid {
    pub nx: usize,
    pub nt: usize,
    /// Runge–Kutta substeps per time interval when tracing characteristics.
    pub substeps: usize,
}

impl Default for BroadGrid {
    fn default() -> Self {
        Self {
            nx: 201,
            nt: 81,
            substeps: 4,
        }
    }
}

/// The operator `T` with its backward characteristics precomputed.
pub struct BroadOperator {
    grid: UniformGrid,
    times: Vec<f64>,
    kernel: Kernel,
    alpha: FilterScale,
    /// `paths[k][j]`: positions at `t_0..=t_k` of the characteristic through `(x_j, t_k)`.
    paths: Vec<Vec<Vec<f64>>>,
    /// `u_x` along the same paths.
    gradients: Vec<Vec<Vec<f64>>>,
    feet: Vec<Vec<f64>>,
    lipschitz: f64,
    domain: DomainOfDeterminacy,
}

impl BroadOperator {
    pub fn new(
        u: &dyn VelocityField,
        k: &Kernel,
        a: FilterScale,
        domain: &DomainOfDeterminacy,
        sampling: BroadGrid,
    ) -> Result<Self, BroadError> {
        if sampling.nx < 2 || sampling.nt < 2 || sampling.substeps == 0 {
            return Err(BroadError::Invalid(format!("degenerate sampling {sampling:?}")));
        }
        let (lo, hi) = domain.omega_target;
        let grid = UniformGrid::spanning(lo, hi, sampling.nx)?;
        let t_end = domain.t_end;
        let times: Vec<f64> = (0..sampling.nt)
            .map(|m| t_end * m as f64 / (sampling.nt - 1) as f64)
            .collect();
        let xs = grid.points();
        let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        let mut paths = Vec::with_capacity(times.len());
        let mut gradients = Vec::with_capacity(times.len());
        let mut feet = Vec::with_capacity(times.len());
        for kt in 0..times.len() {
            let rows: Vec<(Vec<f64>, Vec<f64>)> = xs
                .par_iter()
                .map(|&xi| {
                    let path = u.trace_back(xi, &times, kt, sampling.substeps);
                    let grads = path.iter().zip(&times).map(|(&x, &t)| u.u_x(x, t)).collect();
                    (path, grads)
                })
                .collect();
            for (j, (path, _)) in rows.iter().enumerate() {
                if domain.contains(xs[j]) && path.iter().any(|&x| x < lo - slack || x > hi + slack) {
                    return Err(BroadError::Determinacy {
                        xi: xs[j],
                        tau: times[kt],
                        lo,
                        hi,
                    });
                }
            }
            feet.push(rows.iter().map(|(p, _)| p[0]).collect());
            let (p, g): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            paths.push(p);
            gradients.push(g);
        }
        let mut max_ux = 0.0f64;
        for &t in &times {
            for &x in &xs {
                max_ux = max_ux.max(u.u_x(x, t).abs());
            }
        }
        Ok(Self {
            grid,
            times,
            kernel: k.clone(),
            alpha: a,
            paths,
            gradients,
            feet,
            lipschitz: 1.05 * max_ux,
            domain: domain.clone(),
        })
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `L`, 1.05 times the sampled maximum of `|u_x|`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn domain(&self) -> &DomainOfDeterminacy {
        &self.domain
    }

    /// `ρ^{(0)}(x,t) = ρ₀(x)`.
    pub fn initial_iterate(&self, rho0: &(dyn Fn(f64) -> f64 + Sync)) -> SpaceTimeField {
        SpaceTimeField::from_fn(self.grid, &self.times, |x, _| rho0(x))
    }

    pub fn apply(&self, rho: &SpaceTimeField, rho0: &(dyn Fn(f64) -> f64 + Sync)) -> Result<SpaceTimeField, BroadError> {
        let filtered: Vec<SampledField> = rho
            .rows
            .par_iter()
            .map(|row| {
                let f = SampledField::new(self.grid, row.clone(), Boundary::ConstantExtension)?;
                convolve(&f, &self.kernel, self.alpha)
            })
            .collect::<Result<_, KernelError>>()?;
        let dt = if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        };
        let rows = (0..self.times.len())
            .into_par_iter()
            .map(|kt| {
                (0..self.grid.len())
                    .map(|j| {
                        let path = &self.paths[kt][j];
                        let grads = &self.gradients[kt][j];
                        let h = |m: usize| filtered[m].interpolate(path[m]) * grads[m];
                        let mut integral = 0.0;
                        for m in 0..kt {
                            integral += 0.5 * dt * (h(m) + h(m + 1));
                        }
                        rho0(self.feet[kt][j]) - integral
                    })
                    .collect()
            })
            .collect();
        Ok(SpaceTimeField {
            grid: self.grid,
            times: self.times.clone(),
            rows,
        })
    }
}

/// One application of `T` to `rho_m`.
pub fn apply_t(
    rho_m: &SpaceTimeField,
    rho0: &(dyn Fn(f64) -> f64 + Sync),
    u: &dyn VelocityField,
    k: &Kernel,
    a: FilterScale,
    domain: &DomainOfDeterminacy,
) -> Result<SpaceTimeField, BroadError> {
    let sampling = BroadGrid {
        nx: rho_m.grid.len(),
        nt: rho_m.times.len(),
        substeps: BroadGrid::default().substeps,
    };
    BroadOperator::new(u, k, a, domain, sampling)?.apply(rho_m, rho0)
}

#[derive(Debug, Clone)]
pub struct BroadSolution {
    pub rho: SpaceTimeField,
    /// Number of applications of `T`.
    pub iterations: usize,
    /// Weighted distance between the last two iterates.
    pub final_residual: f64,
    pub residuals: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub lipschitz: f64,
}

impl BroadSolution {
    pub fn max_ratio(&self) -> f64 {
        self.contraction_ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn contraction_holds(&self, slack: f64) -> bool {
        self.contraction_ratios.iter().all(|&r| r <= 0.5 + slack)
    }

    /// CSV `iter,residual,ratio`; the first row has no ratio and reports `nan`.
    pub fn write_history<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iter,residual,ratio")?;
        for (m, r) in self.residuals.iter().enumerate() {
            let ratio = if m == 0 { f64::NAN } else { self.contraction_ratios[m - 1] };
            writeln!(w, "{},{},{}", m + 1, fmt_real(*r), fmt_real(ratio))?;
        }
        Ok(())
    }
}

/// Picard iteration from a given first iterate until successive iterates differ by less than
/// `tol` in the weighted norm.
pub fn iterate_from(
    op: &BroadOperator,
    start: SpaceTimeField,
    rho0: &(dyn Fn(f64) -> f64 + Sync),
    tol: f64,
    max_iter: usize,
) -> Result<BroadSolution, BroadError> {
    if !(tol > 0.0) {
        return Err(BroadError::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let lipschitz = op.lipschitz();
    let mut current = start;
    let mut residuals = Vec::new();
    let mut ratios = Vec::new();
    for m in 1..=max_iter {
        let next = op.apply(&current, rho0)?;
        let diff = weighted_norm(&next.difference(&current), lipschitz);
        if let Some(&prev) = residuals.last() {
            ratios.push(if prev > 0.0 { diff / prev } else { 0.0 });
        }
        residuals.push(diff);
        current = next;
        if diff < tol {
            return Ok(BroadSolution {
                rho: current,
                iterations: m,
                final_residual: diff,
                residuals,
                contraction_ratios: ratios,
                lipschitz,
            });
        }
    }
    Err(BroadError::NotConverged {
        iterations: max_iter,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
        ratios,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn solve_broad(
    rho0: &(dyn Fn(f64) -> f64 + Sync),
    u: &dyn VelocityField,
    k: &Kernel,
    a: FilterScale,
    domain: &DomainOfDeterminacy,
    sampling: BroadGrid,
    tol: f64,
    max_iter: usize,
) -> Result<BroadSolution, BroadError> {
    let op = BroadOperator::new(u, k, a, domain, sampling)?;
    let start = op.initial_iterate(rho0);
    iterate_from(&op, start, rho0, tol, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn alpha(a: f64) -> FilterScale {
        FilterScale::new(a).unwrap()
    }

    #[test]
    fn domain_inset() {
        let still = build_domain(&ConstantVelocity(0.0), (-2.0, 2.0), 1.0).unwrap();
        assert_eq!(still.omega, (-2.0, 2.0));
        let moving = build_domain(&ConstantVelocity(1.0), (-2.0, 2.0), 0.5).unwrap();
        assert_abs_diff_eq!(moving.omega.0, -1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(moving.omega.1, 1.5, epsilon = 1e-15);
        assert!(moving.certificate.holds());
        assert_eq!(moving.certificate.traced, 50);
        assert!(matches!(
            build_domain(&ConstantVelocity(3.0), (-1.0, 1.0), 1.0),
            Err(BroadError::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn certificate_for_expanding_flow() {
        let d = build_domain(&AnalyticVelocity::expanding(), (-3.0, 3.0), 0.5).unwrap();
        assert!(d.certificate.holds());
        assert!(d.certificate.min_margin > 0.0);
    }

    #[test]
    fn weighted_norm_examples() {
        let grid = UniformGrid::spanning(0.0, 1.0, 11).unwrap();
        let times = [0.0, 0.5, 1.0];
        let c = SpaceTimeField::from_fn(grid, &times, |_, _| -3.0);
        assert_eq!(weighted_norm(&c, 0.7), 3.0);
        let g = SpaceTimeField::from_fn(grid, &times, |_, t| (2.0 * 1.3 * t).exp());
        assert_abs_diff_eq!(weighted_norm(&g, 1.3), 1.0, epsilon = 1e-15);
        let top = SpaceTimeField::from_fn(grid, &times, |_, t| if t == 1.0 { 1.0 } else { 0.0 });
        assert_abs_diff_eq!(weighted_norm(&top, 1.0), (-2.0f64).exp(), epsilon = 1e-16);
    }

    #[test]
    fn constant_velocity_is_exact_after_one_application() {
        let u = ConstantVelocity(0.4);
        let d = build_domain(&u, (-3.0, 3.0), 1.0).unwrap();
        let rho0 = |x: f64| (-x * x).exp();
        let sol = solve_broad(&rho0, &u, &Kernel::helmholtz(), alpha(0.2), &d, BroadGrid { nx: 121, nt: 21, substeps: 2 }, 1e-12, 10).unwrap();
        assert_eq!(sol.iterations, 2);
        assert_eq!(sol.final_residual, 0.0);
        let last = sol.rho.times.len() - 1;
        for (j, x) in sol.rho.grid.points().iter().enumerate() {
            assert_abs_diff_eq!(sol.rho.rows[last][j], rho0(x - 0.4), epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_iterate_gives_initial_data() {
        let u = AnalyticVelocity::expanding();
        let d = build_domain(&u, (-3.0, 3.0), 0.5).unwrap();
        let grid = UniformGrid::spanning(-3.0, 3.0, 61).unwrap();
        let times: Vec<f64> = (0..11).map(|m| 0.05 * m as f64).collect();
        let zero = SpaceTimeField::from_fn(grid, &times, |_, _| 0.0);
        let one = |_x: f64| 1.0;
        let t = apply_t(&zero, &one, &u, &Kernel::helmholtz(), alpha(0.2), &d).unwrap();
        for row in &t.rows {
            for v in row {
                assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn history_csv() {
        let u = ConstantVelocity(0.0);
        let d = build_domain(&u, (-1.0, 1.0), 0.2).unwrap();
        let rho0 = |x: f64| 1.0 + x;
        let sol = solve_broad(&rho0, &u, &Kernel::tent(), alpha(0.3), &d, BroadGrid { nx: 41, nt: 5, substeps: 1 }, 1e-12, 5).unwrap();
        let mut buf = Vec::new();
        sol.write_history(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,residual,ratio\n"));
        assert_eq!(text.lines().count(), 1 + sol.iterations);
    }
}
