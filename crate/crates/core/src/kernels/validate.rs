//! Admissibility checks: normalization, positivity, radial monotonicity, evenness and
//! decay of `k ĝ(k)`.

use std::fmt;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Kernel, KernelError, TRUNCATION_RADIUS};
use crate::quadrature::Adaptive;

/// Sampled checks on infinite-support kernels are restricted to this radius (in kernel scales) so
/// that fast-decaying densities do not underflow to zero.
const SAMPLE_RADIUS: f64 = 20.0;
const NORMALIZATION_TOL: f64 = 1e-8;
const FFT_POINTS: usize = 1 << 14;
/// `max |k ĝ|` over the top frequency decade must stay below this fraction of the global maximum.
const DECAY_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    Normalization,
    Positivity,
    Monotonicity,
    Evenness,
    FourierDecay,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Normalization,
        Condition::Positivity,
        Condition::Monotonicity,
        Condition::Evenness,
        Condition::FourierDecay,
    ];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Normalization => "normalization",
            Condition::Positivity => "positivity",
            Condition::Monotonicity => "monotonicity",
            Condition::Evenness => "evenness",
            Condition::FourierDecay => "fourier-decay",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub kernel: String,
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, condition: Condition) -> &ConditionCheck {
        self.checks
            .iter()
            .find(|c| c.condition == condition)
            .expect("every condition is checked")
    }

    pub fn failed(&self) -> Vec<Condition> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.condition)
            .collect()
    }
}

fn eval_checked(k: &Kernel, x: f64) -> Result<f64, KernelError> {
    let v = k.evaluate(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(KernelError::NonFinite { x })
    }
}

pub fn validate_kernel(k: &Kernel, samples: usize) -> Result<ValidationReport, KernelError> {
    if samples < 16 {
        return Err(KernelError::TooFewSamples(samples));
    }
    eval_checked(k, 0.0)?;
    let scale = k.scale();
    let sample_radius = k.support_radius().unwrap_or(SAMPLE_RADIUS * scale);
    // open interval (-R, R), symmetric, never hitting ±R
    let xs: Vec<f64> = (0..samples)
        .map(|i| -sample_radius + sample_radius * (2 * i + 1) as f64 / samples as f64)
        .collect();
    let vals: Vec<f64> = xs
        .iter()
        .map(|&x| eval_checked(k, x))
        .collect::<Result<_, _>>()?;

    let mut checks = Vec::with_capacity(5);

    // 1. normalization
    let r = k.truncation_radius();
    let integral = Adaptive::with_abs_tol(1e-12)
        .integrate_with_breaks(|x| k.evaluate(x), &[-r, 0.0, r])
        .map_err(|e| match e {
            crate::quadrature::QuadratureError::NonFinite { x } => KernelError::NonFinite { x },
            other => KernelError::Quadrature(other),
        })?
        .value;
    checks.push(ConditionCheck {
        condition: Condition::Normalization,
        passed: (integral - 1.0).abs() <= NORMALIZATION_TOL,
        detail: format!("integral = {integral:.12}"),
    });

    // 2. positivity on the support
    let worst = xs
        .iter()
        .zip(&vals)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(x, v)| (*x, *v))
        .unwrap();
    checks.push(ConditionCheck {
        condition: Condition::Positivity,
        passed: worst.1 > 0.0,
        detail: format!("min g = {:e} at x = {}", worst.1, worst.0),
    });

    // 3. closer points weigh at least as much: g non-increasing in |x| on each half-line
    let mut mono_violation: Option<(f64, f64)> = None;
    let tol = |a: f64| 1e-12 * a.abs() + 1e-300;
    for side in [1.0, -1.0] {
        let mut prev = eval_checked(k, 0.0)?;
        for i in 1..=samples {
            let x = side * sample_radius * i as f64 / (samples as f64 + 0.5);
            let v = eval_checked(k, x)?;
            if v > prev + tol(prev) && mono_violation.is_none() {
                mono_violation = Some((x, v - prev));
            }
            prev = v;
        }
    }
    checks.push(ConditionCheck {
        condition: Condition::Monotonicity,
        passed: mono_violation.is_none(),
        detail: match mono_violation {
            None => "non-increasing in |x|".into(),
            Some((x, d)) => format!("g increases by {d:e} at x = {x}"),
        },
    });

    // 4. evenness
    let mut max_asym = 0.0f64;
    let mut at = 0.0;
    for (&x, &v) in xs.iter().zip(&vals) {
        let d = (v - eval_checked(k, -x)?).abs();
        if d > max_asym {
            max_asym = d;
            at = x;
        }
    }
    let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    checks.push(ConditionCheck {
        condition: Condition::Evenness,
        passed: max_asym <= 1e-12 * peak.max(1e-300),
        detail: format!("max |g(x) - g(-x)| = {max_asym:e} at x = {at}"),
    });

    // 5. k ĝ(k) -> 0
    let (decay_ratio, how) = if k.has_fourier_hint() {
        (analytic_decay_ratio(k), "analytic")
    } else {
        (discrete_decay_ratio(k)?, "discrete")
    };
    checks.push(ConditionCheck {
        condition: Condition::FourierDecay,
        passed: decay_ratio < DECAY_FRACTION,
        detail: format!("top-decade/peak of |k g^(k)| = {decay_ratio:.4} ({how})"),
    });

    Ok(ValidationReport {
        kernel: k.name().to_string(),
        checks,
    })
}

fn analytic_decay_ratio(k: &Kernel) -> f64 {
    let scale = k.scale();
    // log grid in the dimensionless wavenumber kα over [1e-2, 1e6]
    let n = 801;
    let ks: Vec<f64> = (0..n)
        .map(|i| 10f64.powf(-2.0 + 8.0 * i as f64 / (n - 1) as f64) / scale)
        .collect();
    let mags: Vec<f64> = ks
        .iter()
        .map(|&kk| (kk * scale * k.fourier_transform(kk).unwrap_or(f64::NAN)).abs())
        .collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    let top = mags[n - n / 8..].iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        top / peak
    } else {
        0.0
    }
}

fn discrete_decay_ratio(k: &Kernel) -> Result<f64, KernelError> {
    let n = FFT_POINTS;
    let half_width = match k.support_radius() {
        Some(r) => 4.0 * r,
        None => TRUNCATION_RADIUS * k.scale(),
    };
    let dx = 2.0 * half_width / n as f64;
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|i| {
            let x = -half_width + i as f64 * dx;
            eval_checked(k, x).map(|v| Complex::new(v, 0.0))
        })
        .collect::<Result<_, _>>()?;
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = (1..=n / 2)
        .map(|j| {
            let kk = 2.0 * std::f64::consts::PI * j as f64 / (n as f64 * dx);
            kk * k.scale() * dx * buf[j].norm()
        })
        .collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    let top = mags[n / 20..].iter().cloned().fold(0.0, f64::max);
    Ok(if peak > 0.0 { top / peak } else { 0.0 })
}
