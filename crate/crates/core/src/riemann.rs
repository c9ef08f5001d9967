//! Exact Riemann solutions of the pressureless transport system and the closed-form filtered
//! profiles of the observable system.
//!
//! Jumps use the convention `[q] = q_l - q_r`. With it the delta-shock weight
//! `w(t) = t ([ρu] - σ[ρ]) / √(1+σ²)` is positive for all positive densities with `u_l > u_r`.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::kernels::{FilterScale, Kernel, KernelFamily};
use crate::output::fmt_real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiemannError {
    #[error("densities must be non-negative (rho_l = {rho_l}, rho_r = {rho_r})")]
    NegativeDensity { rho_l: f64, rho_r: f64 },
    #[error("Riemann data must be finite")]
    NonFinite,
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("operation requires a delta-shock, data give a {0}")]
    NotDeltaShock(RiemannCase),
}

/// Piecewise-constant initial state: `(ρ_l, u_l)` for `x < 0`, `(ρ_r, u_r)` for `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannData {
    pub rho_l: f64,
    pub u_l: f64,
    pub rho_r: f64,
    pub u_r: f64,
}

impl RiemannData {
    pub fn new(rho_l: f64, u_l: f64, rho_r: f64, u_r: f64) -> Result<Self, RiemannError> {
        if ![rho_l, u_l, rho_r, u_r].iter().all(|v| v.is_finite()) {
            return Err(RiemannError::NonFinite);
        }
        if rho_l < 0.0 || rho_r < 0.0 {
            return Err(RiemannError::NegativeDensity { rho_l, rho_r });
        }
        Ok(Self {
            rho_l,
            u_l,
            rho_r,
            u_r,
        })
    }

    /// `[ρu] - σ[ρ]`, the rate at which mass collects on the shock (per unit `x`-slice).
    pub fn mass_rate(&self, sigma: f64) -> f64 {
        (self.rho_l * self.u_l - self.rho_r * self.u_r) - sigma * (self.rho_l - self.rho_r)
    }

    /// Initial velocity `u₀(x)`; the value at `x = 0` is the midpoint.
    pub fn initial_u(&self, x: f64) -> f64 {
        step(x, self.u_l, self.u_r)
    }

    pub fn initial_rho(&self, x: f64) -> f64 {
        step(x, self.rho_l, self.rho_r)
    }
}

fn step(x: f64, left: f64, right: f64) -> f64 {
    if x < 0.0 {
        left
    } else if x > 0.0 {
        right
    } else {
        0.5 * (left + right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiemannCase {
    /// `u_l < u_r`: two contact discontinuities enclosing a vacuum.
    Vacuum,
    /// `u_l = u_r`: a single contact discontinuity.
    Contact,
    /// `u_l > u_r`: a weighted delta travelling at `σ = (u_l + u_r)/2`.
    DeltaShock,
}

impl fmt::Display for RiemannCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiemannCase::Vacuum => "vacuum",
            RiemannCase::Contact => "contact",
            RiemannCase::DeltaShock => "delta-shock",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSolution {
    pub data: RiemannData,
    pub case: RiemannCase,
    /// Shock or contact speed. For a vacuum this is the speed `(u_l+u_r)/2` of the step in the
    /// filtered Burgers solution; the vacuum itself spans `u_l t ≤ x ≤ u_r t`.
    pub sigma: f64,
    /// Velocity carried on the shock.
    pub u_delta: f64,
    /// Coefficient of `t` in `w(t)`; zero unless the case is a delta-shock.
    pub weight_rate: f64,
}

/// Pointwise value of the exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointValue {
    Regular { rho: f64, u: f64 },
    /// On the shock ray. The density there is a delta measure, see [`shock_weight`].
    OnShock { u: f64 },
}

pub fn classify(d: &RiemannData) -> Result<RiemannSolution, RiemannError> {
    let d = RiemannData::new(d.rho_l, d.u_l, d.rho_r, d.u_r)?;
    let mid = 0.5 * (d.u_l + d.u_r);
    let (case, weight_rate) = if d.u_l > d.u_r {
        (
            RiemannCase::DeltaShock,
            d.mass_rate(mid) / (1.0 + mid * mid).sqrt(),
        )
    } else if d.u_l < d.u_r {
        (RiemannCase::Vacuum, 0.0)
    } else {
        (RiemannCase::Contact, 0.0)
    };
    Ok(RiemannSolution {
        data: d,
        case,
        sigma: mid,
        u_delta: mid,
        weight_rate,
    })
}

impl RiemannSolution {
    pub fn evaluate(&self, x: f64, t: f64) -> Result<PointValue, RiemannError> {
        if !(t > 0.0) {
            return Err(RiemannError::NonPositiveTime(t));
        }
        let d = &self.data;
        let left = PointValue::Regular {
            rho: d.rho_l,
            u: d.u_l,
        };
        let right = PointValue::Regular {
            rho: d.rho_r,
            u: d.u_r,
        };
        let speed = x / t;
        Ok(match self.case {
            RiemannCase::Vacuum => {
                if speed < d.u_l {
                    left
                } else if speed > d.u_r {
                    right
                } else {
                    PointValue::Regular { rho: 0.0, u: speed }
                }
            }
            // the contact line itself is a null set; assign it to the right state
            RiemannCase::Contact => {
                if speed < self.sigma {
                    left
                } else {
                    right
                }
            }
            RiemannCase::DeltaShock => {
                if speed < self.sigma {
                    left
                } else if speed > self.sigma {
                    right
                } else {
                    PointValue::OnShock { u: self.u_delta }
                }
            }
        })
    }

    /// `w(t)`, the arclength density of the delta on the curve `x = σt`.
    pub fn shock_weight(&self, t: f64) -> Result<f64, RiemannError> {
        if self.case != RiemannCase::DeltaShock {
            return Err(RiemannError::NotDeltaShock(self.case));
        }
        Ok(self.weight_rate * t)
    }

    /// Mass of the delta on a constant-`t` slice: `√(1+σ²) w(t) = t ([ρu] - σ[ρ])`.
    pub fn spatial_mass(&self, t: f64) -> Result<f64, RiemannError> {
        Ok((1.0 + self.sigma * self.sigma).sqrt() * self.shock_weight(t)?)
    }
}

pub fn evaluate_exact(d: &RiemannData, x: f64, t: f64) -> Result<PointValue, RiemannError> {
    classify(d)?.evaluate(x, t)
}

pub fn shock_weight(d: &RiemannData, t: f64) -> Result<f64, RiemannError> {
    classify(d)?.shock_weight(t)
}

/// Filtered velocity of the step solution `u = u_l | u_r` moving at `σ`:
/// `ū = u_l + (u_r - u_l) φ⁻((x-σt)/α)` left of the ray, `u_δ` on it and
/// `ū = u_r - (u_r - u_l) φ⁺((x-σt)/α)` right of it.
pub fn filtered_velocity(d: &RiemannData, k: &Kernel, a: FilterScale, x: f64, t: f64) -> f64 {
    let sigma = 0.5 * (d.u_l + d.u_r);
    let kernel = k.scaled(a);
    let xi = x - sigma * t;
    if xi < 0.0 {
        d.u_l + (d.u_r - d.u_l) * kernel.cdf(xi)
    } else if xi > 0.0 {
        d.u_r - (d.u_r - d.u_l) * kernel.upper_tail(xi)
    } else {
        sigma
    }
}

/// Filtered fields of the delta-shock solution about the ray `x = σt`.
///
/// `rhobar_smooth` is the filter of the bounded part `h` of the density only.
#[derive(Debug, Clone)]
pub struct FilteredProfile {
    data: RiemannData,
    sigma: f64,
    u_delta: f64,
    kernel: Kernel,
    alpha: FilterScale,
}

pub fn filtered_profile(
    d: &RiemannData,
    k: &Kernel,
    a: FilterScale,
) -> Result<FilteredProfile, RiemannError> {
    let sol = classify(d)?;
    if sol.case != RiemannCase::DeltaShock {
        return Err(RiemannError::NotDeltaShock(sol.case));
    }
    Ok(FilteredProfile {
        data: sol.data,
        sigma: sol.sigma,
        u_delta: sol.u_delta,
        kernel: k.scaled(a),
        alpha: a,
    })
}

impl FilteredProfile {
    pub fn data(&self) -> &RiemannData {
        &self.data
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn u_delta(&self) -> f64 {
        self.u_delta
    }

    pub fn alpha(&self) -> FilterScale {
        self.alpha
    }

    /// The scaled kernel `g^α`.
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    fn is_helmholtz(&self) -> bool {
        self.kernel.family() == KernelFamily::Helmholtz
    }

    /// Filter of a step `left | right` across the ray, at offset `xi = x - σt`.
    fn filtered_step(&self, left: f64, right: f64, xi: f64) -> f64 {
        if self.is_helmholtz() {
            let alpha = self.alpha.alpha();
            if xi < 0.0 {
                left - 0.5 * (left - right) * (xi / alpha).exp()
            } else if xi > 0.0 {
                right - 0.5 * (right - left) * (-xi / alpha).exp()
            } else {
                0.5 * (left + right)
            }
        } else if xi < 0.0 {
            left + (right - left) * self.kernel.cdf(xi)
        } else if xi > 0.0 {
            right - (right - left) * self.kernel.upper_tail(xi)
        } else {
            0.5 * (left + right)
        }
    }

    fn filtered_step_slope(&self, left: f64, right: f64, xi: f64) -> f64 {
        if self.is_helmholtz() {
            let alpha = self.alpha.alpha();
            if xi < 0.0 {
                -(left - right) / (2.0 * alpha) * (xi / alpha).exp()
            } else {
                (right - left) / (2.0 * alpha) * (-xi / alpha).exp()
            }
        } else {
            (right - left) * self.kernel.evaluate(xi)
        }
    }

    pub fn ubar(&self, x: f64, t: f64) -> f64 {
        let xi = x - self.sigma * t;
        if xi == 0.0 {
            return self.u_delta;
        }
        self.filtered_step(self.data.u_l, self.data.u_r, xi)
    }

    pub fn rhobar_smooth(&self, x: f64, t: f64) -> f64 {
        self.filtered_step(self.data.rho_l, self.data.rho_r, x - self.sigma * t)
    }

    pub fn ubar_x(&self, x: f64, t: f64) -> f64 {
        self.filtered_step_slope(self.data.u_l, self.data.u_r, x - self.sigma * t)
    }

    pub fn rhobar_x(&self, x: f64, t: f64) -> f64 {
        self.filtered_step_slope(self.data.rho_l, self.data.rho_r, x - self.sigma * t)
    }

    /// CSV `x,ubar,rhobar,ubar_x,rhobar_x` at time `t`.
    pub fn write_csv<W: Write>(&self, mut w: W, t: f64, xs: &[f64]) -> io::Result<()> {
        writeln!(w, "x,ubar,rhobar,ubar_x,rhobar_x")?;
        for &x in xs {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_real(x),
                fmt_real(self.ubar(x, t)),
                fmt_real(self.rhobar_smooth(x, t)),
                fmt_real(self.ubar_x(x, t)),
                fmt_real(self.rhobar_x(x, t))
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn data(a: f64, b: f64, c: f64, d: f64) -> RiemannData {
        RiemannData::new(a, b, c, d).unwrap()
    }

    #[test]
    fn classify_delta_shock() {
        let s = classify(&data(1.0, 2.0, 1.0, 0.0)).unwrap();
        assert_eq!(s.case, RiemannCase::DeltaShock);
        assert_eq!(s.sigma, 1.0);
        assert_eq!(s.u_delta, 1.0);
        assert_abs_diff_eq!(s.weight_rate, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn classify_vacuum_and_contact() {
        let v = classify(&data(1.0, 0.0, 1.0, 2.0)).unwrap();
        assert_eq!(v.case, RiemannCase::Vacuum);
        assert_eq!(v.weight_rate, 0.0);
        let c = classify(&data(3.0, 1.0, 5.0, 1.0)).unwrap();
        assert_eq!(c.case, RiemannCase::Contact);
        assert_eq!(c.sigma, 1.0);
        assert!(matches!(
            c.evaluate(0.5, 1.0).unwrap(),
            PointValue::Regular { rho, .. } if rho == 3.0
        ));
        assert!(matches!(
            c.evaluate(1.5, 1.0).unwrap(),
            PointValue::Regular { rho, .. } if rho == 5.0
        ));
    }

    #[test]
    fn negative_density_rejected() {
        assert!(matches!(
            RiemannData::new(-1.0, 0.0, 1.0, 0.0),
            Err(RiemannError::NegativeDensity { .. })
        ));
        let raw = RiemannData {
            rho_l: 1.0,
            u_l: 0.0,
            rho_r: -0.5,
            u_r: 0.0,
        };
        assert!(classify(&raw).is_err());
    }

    #[test]
    fn evaluate_regions() {
        let vac = data(1.0, 0.0, 1.0, 2.0);
        assert_eq!(
            evaluate_exact(&vac, 1.0, 1.0).unwrap(),
            PointValue::Regular { rho: 0.0, u: 1.0 }
        );
        assert_eq!(
            evaluate_exact(&vac, 0.7, 0.5).unwrap(),
            PointValue::Regular { rho: 0.0, u: 1.4 }
        );
        let ds = data(1.0, 2.0, 1.0, 0.0);
        assert_eq!(
            evaluate_exact(&ds, 2.0, 1.0).unwrap(),
            PointValue::Regular { rho: 1.0, u: 0.0 }
        );
        assert_eq!(
            evaluate_exact(&ds, 3.0, 3.0).unwrap(),
            PointValue::OnShock { u: 1.0 }
        );
        assert!(matches!(
            evaluate_exact(&ds, 0.0, 0.0),
            Err(RiemannError::NonPositiveTime(_))
        ));
    }

    #[test]
    fn weights() {
        let s = classify(&data(1.0, 2.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(s.shock_weight(3.0).unwrap(), 3.0 * 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.spatial_mass(3.0).unwrap(), 6.0, epsilon = 1e-14);
        assert_eq!(s.shock_weight(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(shock_weight(&data(2.0, 1.0, 1.0, -1.0), 1.0).unwrap(), 3.0, epsilon = 1e-15);
        assert!(matches!(
            shock_weight(&data(1.0, 0.0, 1.0, 2.0), 1.0),
            Err(RiemannError::NotDeltaShock(RiemannCase::Vacuum))
        ));
    }

    #[test]
    fn filtered_velocity_values() {
        let d = data(1.0, 2.0, 1.0, 0.0);
        let a = FilterScale::new(1.0).unwrap();
        let h = Kernel::helmholtz();
        assert_abs_diff_eq!(filtered_velocity(&d, &h, a, 0.0, 1.0), 2.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(filtered_velocity(&d, &h, a, 0.0, 1.0), 1.632_120_558_828_557_7, epsilon = 1e-14);
        for k in [Kernel::helmholtz(), Kernel::gaussian(), Kernel::tent()] {
            assert_eq!(filtered_velocity(&d, &k, a, 2.5, 2.5), 1.0);
        }
        let tiny = FilterScale::new(1e-6).unwrap();
        assert_abs_diff_eq!(filtered_velocity(&d, &h, tiny, 0.9, 1.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn profile_closed_forms() {
        let d = data(1.0, 2.0, 1.0, 0.0);
        let p = filtered_profile(&d, &Kernel::helmholtz(), FilterScale::new(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(p.ubar_x(0.0, 1.0), -(-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.ubar_x(0.0, 1.0), -0.367_879_441_171_442_33, epsilon = 1e-15);
        let flat = data(2.0, 2.0, 2.0, -1.0);
        let q = filtered_profile(&flat, &Kernel::helmholtz(), FilterScale::new(0.3).unwrap()).unwrap();
        for x in [-1.0, -0.1, 0.2, 0.9] {
            assert_eq!(q.rhobar_x(x, 1.0), 0.0);
            assert_eq!(q.rhobar_smooth(x, 1.0), 2.0);
        }
        assert!(matches!(
            filtered_profile(&data(1.0, 0.0, 1.0, 1.0), &Kernel::helmholtz(), FilterScale::new(1.0).unwrap()),
            Err(RiemannError::NotDeltaShock(_))
        ));
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let d = data(2.0, 3.0, 1.0, -1.0);
        let a = FilterScale::new(0.4).unwrap();
        for k in [Kernel::helmholtz(), Kernel::gaussian(), Kernel::tent()] {
            let p = filtered_profile(&d, &k, a).unwrap();
            let h = 1e-5;
            for x in [-0.9, -0.3, 1.3, 1.6, 2.5] {
                let t = 1.0;
                let fd_u = (p.ubar(x + h, t) - p.ubar(x - h, t)) / (2.0 * h);
                let fd_r = (p.rhobar_smooth(x + h, t) - p.rhobar_smooth(x - h, t)) / (2.0 * h);
                assert_abs_diff_eq!(fd_u, p.ubar_x(x, t), epsilon = 1e-8);
                assert_abs_diff_eq!(fd_r, p.rhobar_x(x, t), epsilon = 1e-8);
                let direct = filtered_velocity(&d, &k, a, x, t);
                assert_abs_diff_eq!(direct, p.ubar(x, t), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn profile_is_continuous_across_the_ray() {
        let d = data(1.0, 2.0, 3.0, 0.0);
        let p = filtered_profile(&d, &Kernel::helmholtz(), FilterScale::new(0.1).unwrap()).unwrap();
        let t = 2.0;
        let x0 = p.sigma() * t;
        assert_abs_diff_eq!(p.ubar(x0 - 1e-12, t), p.u_delta(), epsilon = 1e-9);
        assert_abs_diff_eq!(p.ubar(x0 + 1e-12, t), p.u_delta(), epsilon = 1e-9);
        assert_abs_diff_eq!(p.ubar(x0 - 5.0, t), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.ubar(x0 + 5.0, t), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn profile_csv_header() {
        let p = filtered_profile(&data(1.0, 2.0, 1.0, 0.0), &Kernel::helmholtz(), FilterScale::new(1.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, 1.0, &[0.0, 1.0, 2.0]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x,ubar,rhobar,ubar_x,rhobar_x\n"));
        assert_eq!(s.lines().count(), 4);
    }

    proptest! {
        #[test]
        fn density_scaling(rl in 0.01f64..5.0, rr in 0.01f64..5.0, ul in -3.0f64..3.0, gap in 0.01f64..3.0, lam in 0.1f64..10.0) {
            let d = data(rl, ul, rr, ul - gap);
            let s = classify(&d).unwrap();
            let scaled = classify(&data(lam * rl, ul, lam * rr, ul - gap)).unwrap();
            prop_assert_eq!(s.sigma, scaled.sigma);
            prop_assert_eq!(s.u_delta, scaled.u_delta);
            prop_assert!((scaled.weight_rate - lam * s.weight_rate).abs() <= 1e-12 * scaled.weight_rate.abs().max(1.0));
            // positivity under the bracket convention
            prop_assert!(s.weight_rate > 0.0);
            prop_assert!(d.u_r < s.sigma && s.sigma < d.u_l);
        }

        #[test]
        fn galilean_shift(ul in -3.0f64..3.0, gap in 0.01f64..3.0, c in -2.0f64..2.0, x in -3.0f64..3.0, t in 0.1f64..3.0) {
            let d = data(1.0, ul, 2.0, ul - gap);
            let shifted = data(1.0, ul + c, 2.0, ul - gap + c);
            let s0 = classify(&d).unwrap();
            let s1 = classify(&shifted).unwrap();
            prop_assert!((s1.sigma - s0.sigma - c).abs() < 1e-12);
            let a = FilterScale::new(0.2).unwrap();
            let k = Kernel::helmholtz();
            let lhs = filtered_velocity(&shifted, &k, a, x + c * t, t) - c;
            let rhs = filtered_velocity(&d, &k, a, x, t);
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn limit_recovery_bound(xi in prop::sample::select(vec![-0.5f64, -0.2, 0.1, 0.3])) {
            let d = data(1.0, 2.0, 1.0, 0.0);
            let k = Kernel::helmholtz();
            let t = 1.0;
            let x = d_sigma(&d) * t + xi;
            let exact = if xi < 0.0 { d.u_l } else { d.u_r };
            let mut prev = f64::INFINITY;
            for alpha in [0.4, 0.2, 0.1, 0.05, 0.025] {
                let a = FilterScale::new(alpha).unwrap();
                let err = (filtered_velocity(&d, &k, a, x, t) - exact).abs();
                let (pm, pp) = crate::kernels::tails(&k.scaled(a), -xi.abs());
                let bound = (d.u_l - d.u_r).abs() * pm.max(pp.min(pm));
                prop_assert!(err <= bound + 1e-15);
                prop_assert!(err < prev);
                prev = err;
            }
        }
    }

    fn d_sigma(d: &RiemannData) -> f64 {
        0.5 * (d.u_l + d.u_r)
    }
}
