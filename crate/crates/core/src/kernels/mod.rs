//! Averaging kernels, the filter scale α and filtering of sampled fields.
//!
//! A [`Kernel`] is a base density `g` together with a scale; evaluation returns
//! `g^α(x) = g(x/α)/α`. The presets carry closed-form cumulative tails
//! `φ⁻(x) = ∫_{-∞}^x g` and `φ⁺(x) = ∫_x^∞ g`; custom kernels fall back to quadrature.

mod filter;
mod validate;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::quadrature::{Adaptive, QuadratureError};

pub use filter::{
    convolve, convolve_derivative, helmholtz_filter, Boundary, Resolution, SampledField,
    UniformGrid,
};
pub use validate::{validate_kernel, Condition, ConditionCheck, ValidationReport};

/// Truncation radius for infinite-support kernels, in units of the kernel scale.
pub const TRUNCATION_RADIUS: f64 = 40.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("filter scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("kernel evaluation is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("validation needs at least 16 samples, got {0}")]
    TooFewSamples(usize),
    #[error("grid spacing {dx} does not resolve filter scale {alpha} (need dx <= alpha)")]
    Unresolved { dx: f64, alpha: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown kernel preset `{0}` (see `presets`)")]
    UnknownPreset(String),
    #[error("singular Helmholtz system at row {0}")]
    Singular(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Length scale α of the averaging; strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FilterScale(f64);

impl FilterScale {
    pub fn new(alpha: f64) -> Result<Self, KernelError> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(Self(alpha))
        } else {
            Err(KernelError::InvalidScale(alpha))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

/// Which closed forms are available for a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `g(x) = ½ e^{-|x|}`, the Green's function of `1 - d²/dx²`.
    Helmholtz,
    /// `g(x) = e^{-x²/2} / √(2π)`.
    Gaussian,
    /// `g(x) = max(0, 1 - |x|)`.
    Tent,
    Custom,
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An averaging kernel at a given scale.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    family: KernelFamily,
    shape: RealFn,
    cdf: Option<RealFn>,
    first_moment: Option<RealFn>,
    fourier: Option<RealFn>,
    support: Option<f64>,
    scale: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("support", &self.support)
            .field("scale", &self.scale)
            .finish()
    }
}

impl Kernel {
    pub fn helmholtz() -> Self {
        Self {
            name: "helmholtz".into(),
            family: KernelFamily::Helmholtz,
            shape: Arc::new(|x: f64| 0.5 * (-x.abs()).exp()),
            cdf: Some(Arc::new(|x: f64| {
                if x <= 0.0 {
                    0.5 * x.exp()
                } else {
                    1.0 - 0.5 * (-x).exp()
                }
            })),
            first_moment: Some(Arc::new(|x: f64| {
                if x <= 0.0 {
                    0.5 * x.exp() * (x - 1.0)
                } else {
                    -0.5 * (-x).exp() * (x + 1.0)
                }
            })),
            fourier: Some(Arc::new(|k: f64| 1.0 / (1.0 + k * k))),
            support: None,
            scale: 1.0,
        }
    }

    pub fn gaussian() -> Self {
        const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
        Self {
            name: "gaussian".into(),
            family: KernelFamily::Gaussian,
            shape: Arc::new(|x: f64| INV_SQRT_2PI * (-0.5 * x * x).exp()),
            cdf: Some(Arc::new(|x: f64| 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2))),
            first_moment: Some(Arc::new(|x: f64| -INV_SQRT_2PI * (-0.5 * x * x).exp())),
            fourier: Some(Arc::new(|k: f64| (-0.5 * k * k).exp())),
            support: None,
            scale: 1.0,
        }
    }

    pub fn tent() -> Self {
        Self {
            name: "tent".into(),
            family: KernelFamily::Tent,
            shape: Arc::new(|x: f64| (1.0 - x.abs()).max(0.0)),
            cdf: Some(Arc::new(|x: f64| {
                if x <= -1.0 {
                    0.0
                } else if x <= 0.0 {
                    0.5 * (1.0 + x) * (1.0 + x)
                } else if x < 1.0 {
                    1.0 - 0.5 * (1.0 - x) * (1.0 - x)
                } else {
                    1.0
                }
            })),
            first_moment: Some(Arc::new(|x: f64| {
                if x <= -1.0 || x >= 1.0 {
                    0.0
                } else if x <= 0.0 {
                    x * x / 2.0 + x * x * x / 3.0 - 1.0 / 6.0
                } else {
                    -1.0 / 6.0 + x * x / 2.0 - x * x * x / 3.0
                }
            })),
            fourier: Some(Arc::new(|k: f64| {
                let h = 0.5 * k;
                if h.abs() < 1e-8 {
                    1.0
                } else {
                    (h.sin() / h).powi(2)
                }
            })),
            support: Some(1.0),
            scale: 1.0,
        }
    }

    /// Kernel from an arbitrary base density. Tails and moments are computed by quadrature.
    /// `support` is the base support radius (`None` for infinite support).
    pub fn custom(
        name: impl Into<String>,
        shape: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: Option<f64>,
    ) -> Self {
        Self {
            name: name.into(),
            family: KernelFamily::Custom,
            shape: Arc::new(shape),
            cdf: None,
            first_moment: None,
            fourier: None,
            support,
            scale: 1.0,
        }
    }

    /// Attaches an analytic Fourier transform `ĝ(k)` of the base density, used for the decay check.
    pub fn with_fourier(mut self, transform: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.fourier = Some(Arc::new(transform));
        self
    }

    pub fn preset(name: &str) -> Result<Self, KernelError> {
        match name {
            "helmholtz" => Ok(Self::helmholtz()),
            "gaussian" => Ok(Self::gaussian()),
            "tent" => Ok(Self::tent()),
            other => Err(KernelError::UnknownPreset(other.to_string())),
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["helmholtz", "gaussian", "tent"]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Returns `g^α`, i.e. this kernel rescaled by `a` (scales compose multiplicatively).
    pub fn scaled(&self, a: FilterScale) -> Self {
        let mut k = self.clone();
        k.scale *= a.alpha();
        k
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        (self.shape)(x / self.scale) / self.scale
    }

    /// Support radius of the scaled kernel (`None` if infinite).
    pub fn support_radius(&self) -> Option<f64> {
        self.support.map(|r| r * self.scale)
    }

    /// Radius beyond which the kernel is treated as zero in discrete sums.
    pub fn truncation_radius(&self) -> f64 {
        self.support_radius()
            .unwrap_or(TRUNCATION_RADIUS * self.scale)
    }

    /// Symmetric interval used for numerical integration of the base density.
    fn base_extent(&self) -> f64 {
        self.support.unwrap_or(TRUNCATION_RADIUS)
    }

    fn is_preset(&self) -> bool {
        self.family != KernelFamily::Custom
    }

    fn base_cdf(&self, y: f64) -> f64 {
        if let Some(cdf) = &self.cdf {
            return cdf(y);
        }
        let r = self.base_extent();
        if y <= -r {
            return 0.0;
        }
        let hi = y.min(r);
        let brk = crate::quadrature::breakpoints(-r, hi, [0.0]);
        Adaptive::with_abs_tol(1e-13)
            .integrate_with_breaks(|s| (self.shape)(s), &brk)
            .map(|i| i.value)
            .unwrap_or(f64::NAN)
    }

    fn base_upper(&self, y: f64) -> f64 {
        if self.is_preset() {
            // presets are even
            return self.base_cdf(-y);
        }
        let r = self.base_extent();
        if y >= r {
            return 0.0;
        }
        let lo = y.max(-r);
        let brk = crate::quadrature::breakpoints(lo, r, [0.0]);
        Adaptive::with_abs_tol(1e-13)
            .integrate_with_breaks(|s| (self.shape)(s), &brk)
            .map(|i| i.value)
            .unwrap_or(f64::NAN)
    }

    /// `∫_{-∞}^x g^α`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.base_cdf(x / self.scale)
    }

    /// `∫_x^∞ g^α`, computed without cancellation for large `x`.
    pub fn upper_tail(&self, x: f64) -> f64 {
        self.base_upper(x / self.scale)
    }

    /// `∫_{-∞}^x y g^α(y) dy`.
    pub fn first_moment(&self, x: f64) -> f64 {
        let y = x / self.scale;
        let base = if let Some(m) = &self.first_moment {
            m(y)
        } else {
            let r = self.base_extent();
            if y <= -r {
                0.0
            } else {
                let brk = crate::quadrature::breakpoints(-r, y.min(r), [0.0]);
                Adaptive::with_abs_tol(1e-13)
                    .integrate_with_breaks(|s| s * (self.shape)(s), &brk)
                    .map(|i| i.value)
                    .unwrap_or(f64::NAN)
            }
        };
        self.scale * base
    }

    /// `∫_a^b g^α`, evaluated from whichever tail keeps the result accurate.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= 0.0 {
            self.cdf(b) - self.cdf(a)
        } else if a >= 0.0 {
            self.upper_tail(a) - self.upper_tail(b)
        } else {
            1.0 - self.cdf(a) - self.upper_tail(b)
        }
    }

    /// Analytic Fourier transform of the scaled kernel, if known: `ĝ^α(k) = ĝ(αk)`.
    pub fn fourier_transform(&self, k: f64) -> Option<f64> {
        self.fourier.as_ref().map(|f| f(k * self.scale))
    }

    pub fn has_fourier_hint(&self) -> bool {
        self.fourier.is_some()
    }
}

/// `g^α(x) = g(x/α)/α`.
pub fn scale_kernel(k: &Kernel, a: FilterScale) -> Kernel {
    k.scaled(a)
}

/// Cumulative tails `(φ⁻(x), φ⁺(x))` of the kernel.
pub fn tails(k: &Kernel, x: f64) -> (f64, f64) {
    (k.cdf(x), k.upper_tail(x))
}
