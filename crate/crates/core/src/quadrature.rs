//! Adaptive Gauss–Kronrod quadrature (7/15 pair) with global error control.
//!
//! Panels are refined in order of largest error estimate until the summed estimate drops below
//! `max(abs_tol, rel_tol * |I|)`. Callers that know where an integrand is non-smooth pass those
//! abscissae as breakpoints so that every initial panel is smooth.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not converge: achieved error {achieved:e}, requested {requested:e} after {panels} panels")]
    NotConverged {
        value: f64,
        achieved: f64,
        requested: f64,
        panels: usize,
    },
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
}

/// Value and error estimate of a converged integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Single 15-point Kronrod panel with embedded 7-point Gauss estimate.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { x: center });
    }
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite { x: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite { x: x2 });
        }
        kronrod += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_panels: 4000,
        }
    }
}

impl Adaptive {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(
        &self,
        f: F,
        a: f64,
        b: f64,
    ) -> Result<Integral, QuadratureError> {
        self.integrate_with_breaks(f, &[a, b])
    }

    /// Integrates over `[breaks[0], breaks[last]]`, seeding one panel per consecutive pair of
    /// breakpoints. Breakpoints must be non-decreasing; zero-width pieces are skipped.
    pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        breaks: &[f64],
    ) -> Result<Integral, QuadratureError> {
        if breaks.len() < 2 {
            return Err(QuadratureError::InvalidInterval {
                a: f64::NAN,
                b: f64::NAN,
            });
        }
        let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
        if !(lo.is_finite() && hi.is_finite()) || breaks.windows(2).any(|w| w[1] < w[0]) {
            return Err(QuadratureError::InvalidInterval { a: lo, b: hi });
        }
        let mut heap = BinaryHeap::new();
        let mut total = 0.0;
        let mut total_err = 0.0;
        let mut evaluations = 0;
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                let (value, error) = gk15(&mut f, w[0], w[1])?;
                evaluations += 15;
                total += value;
                total_err += error;
                heap.push(Panel {
                    a: w[0],
                    b: w[1],
                    value,
                    error,
                });
            }
        }
        let min_width = 64.0 * f64::EPSILON * (hi - lo).abs().max(f64::MIN_POSITIVE);
        // Panels too narrow to split are parked here; their error is still counted.
        let mut frozen_err = 0.0;
        loop {
            let target = self.abs_tol.max(self.rel_tol * total.abs());
            if total_err <= target {
                return Ok(Integral {
                    value: total,
                    error: total_err,
                    evaluations,
                });
            }
            let Some(worst) = heap.pop() else {
                break;
            };
            if heap.len() + 2 > self.max_panels {
                heap.push(worst);
                break;
            }
            if worst.b - worst.a < min_width {
                frozen_err += worst.error;
                if heap.is_empty() {
                    break;
                }
                continue;
            }
            let mid = 0.5 * (worst.a + worst.b);
            let (v1, e1) = gk15(&mut f, worst.a, mid)?;
            let (v2, e2) = gk15(&mut f, mid, worst.b)?;
            evaluations += 30;
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.error;
            heap.push(Panel {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Panel {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
        }
        // Recompute from the panel set to shed accumulated rounding in the running sums.
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum::<f64>() + frozen_err;
        let target = self.abs_tol.max(self.rel_tol * value.abs());
        if error <= target {
            Ok(Integral {
                value,
                error,
                evaluations,
            })
        } else {
            Err(QuadratureError::NotConverged {
                value,
                achieved: error,
                requested: target,
                panels: heap.len(),
            })
        }
    }
}

/// Sorts, clips to `[lo, hi]` and deduplicates candidate breakpoints, returning a list that starts
/// at `lo` and ends at `hi`.
pub fn breakpoints(lo: f64, hi: f64, interior: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = interior
        .into_iter()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut out = Vec::with_capacity(pts.len() + 2);
    out.push(lo);
    out.extend(pts);
    out.push(hi);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = Adaptive::default()
            .integrate(|x| 3.0 * x * x + 2.0 * x + 1.0, 0.0, 2.0)
            .unwrap();
        assert!((r.value - 14.0).abs() < 1e-13);
    }

    #[test]
    fn kink_with_breakpoint() {
        let r = Adaptive::with_abs_tol(1e-13)
            .integrate_with_breaks(|x: f64| (-x.abs()).exp(), &[-5.0, 0.0, 5.0])
            .unwrap();
        assert!((r.value - 2.0 * (1.0 - (-5.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn boundary_layer_refines() {
        let a = 1e-3;
        let r = Adaptive::with_abs_tol(1e-12)
            .integrate(|x: f64| (-x / a).exp() / a, 0.0, 1.0)
            .unwrap();
        assert!((r.value - (1.0 - (-1.0 / a).exp())).abs() < 1e-11);
    }

    #[test]
    fn reports_nonconvergence() {
        let q = Adaptive {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_panels: 3,
        };
        let err = q.integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0).unwrap_err();
        assert!(matches!(err, QuadratureError::NotConverged { .. }));
    }

    #[test]
    fn nan_is_reported() {
        let err = Adaptive::default()
            .integrate(|x: f64| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0)
            .unwrap_err();
        assert!(matches!(err, QuadratureError::NonFinite { .. }));
    }

    #[test]
    fn breakpoints_are_sorted_and_clipped() {
        assert_eq!(breakpoints(0.0, 1.0, [0.5, -1.0, 0.25, 0.5, 2.0]), vec![0.0, 0.25, 0.5, 1.0]);
    }
}
