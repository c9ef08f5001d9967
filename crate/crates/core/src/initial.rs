//! Named initial profiles shared by the solvers and the command-line runner.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitialError {
    #[error("unknown initial-condition preset `{0}` (see `presets`)")]
    Unknown(String),
    #[error("preset `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

/// A one-dimensional profile with an analytic derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `left` for `x < 0`, `right` for `x > 0`, the midpoint at `0`.
    Step { left: f64, right: f64 },
    /// `right + (left - right)(1 - tanh(x/width))/2`.
    SmoothedStep { left: f64, right: f64, width: f64 },
    /// `-amplitude · tanh(x)`.
    NegTanh { amplitude: f64 },
    /// `-amplitude · sin(x)`.
    NegSin { amplitude: f64 },
    /// `base + height · e · exp(-1/(1-r²))`, `r = (x - center)/radius`; peak value `base + height`.
    Bump {
        center: f64,
        radius: f64,
        base: f64,
        height: f64,
    },
    Constant(f64),
    /// `slope · x`
    Linear { slope: f64 },
}

/// Preset names with one-line descriptions.
pub const PRESETS: [(&str, &str); 5] = [
    ("step", "u_l for x < 0, u_r for x > 0"),
    (
        "smoothed-step",
        "u_r + (u_l - u_r)(1 - tanh(x/w))/2 with width w",
    ),
    ("neg-tanh", "-tanh(x)"),
    ("neg-sin", "-sin(x)"),
    ("bump", "compactly supported smooth bump on a constant base"),
];

/// Parameters consulted by [`Profile::from_name`]; unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetParams {
    pub left: f64,
    pub right: f64,
    pub width: f64,
    pub amplitude: f64,
    pub center: f64,
    pub radius: f64,
    pub base: f64,
    pub height: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            left: 1.0,
            right: 0.0,
            width: 0.1,
            amplitude: 1.0,
            center: 0.0,
            radius: 1.0,
            base: 1.0,
            height: 1.0,
        }
    }
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

impl Profile {
    pub fn from_name(name: &str, p: &PresetParams) -> Result<Self, InitialError> {
        let positive = |name: &'static str, what: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(InitialError::InvalidParameter {
                    name,
                    reason: format!("{what} must be positive, got {v}"),
                })
            }
        };
        Ok(match name {
            "step" => Profile::Step {
                left: p.left,
                right: p.right,
            },
            "smoothed-step" => Profile::SmoothedStep {
                left: p.left,
                right: p.right,
                width: positive("smoothed-step", "width", p.width)?,
            },
            "neg-tanh" => Profile::NegTanh {
                amplitude: p.amplitude,
            },
            "neg-sin" => Profile::NegSin {
                amplitude: p.amplitude,
            },
            "bump" => Profile::Bump {
                center: p.center,
                radius: positive("bump", "radius", p.radius)?,
                base: p.base,
                height: p.height,
            },
            other => return Err(InitialError::Unknown(other.to_string())),
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Profile::Step { left, right } => {
                if x < 0.0 {
                    left
                } else if x > 0.0 {
                    right
                } else {
                    0.5 * (left + right)
                }
            }
            Profile::SmoothedStep { left, right, width } => {
                right + (left - right) * 0.5 * (1.0 - (x / width).tanh())
            }
            Profile::NegTanh { amplitude } => -amplitude * x.tanh(),
            Profile::NegSin { amplitude } => -amplitude * x.sin(),
            Profile::Bump {
                center,
                radius,
                base,
                height,
            } => base + height * std::f64::consts::E * bump((x - center) / radius),
            Profile::Constant(c) => c,
            Profile::Linear { slope } => slope * x,
        }
    }

    /// Derivative; the step reports zero (its jump is not a pointwise derivative).
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Profile::Step { .. } | Profile::Constant(_) => 0.0,
            Profile::SmoothedStep { left, right, width } => {
                let c = (x / width).cosh();
                -(left - right) * 0.5 / (width * c * c)
            }
            Profile::NegTanh { amplitude } => {
                let c = x.cosh();
                -amplitude / (c * c)
            }
            Profile::NegSin { amplitude } => -amplitude * x.cos(),
            Profile::Bump {
                center,
                radius,
                height,
                ..
            } => height * std::f64::consts::E * bump_slope((x - center) / radius) / radius,
            Profile::Linear { slope } => slope,
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, Profile::Step { left, right } if left != right)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Step { left, right } => write!(f, "step({left}, {right})"),
            Profile::SmoothedStep { left, right, width } => {
                write!(f, "smoothed-step({left}, {right}, w={width})")
            }
            Profile::NegTanh { amplitude } => write!(f, "neg-tanh(a={amplitude})"),
            Profile::NegSin { amplitude } => write!(f, "neg-sin(a={amplitude})"),
            Profile::Bump {
                center,
                radius,
                base,
                height,
            } => write!(f, "bump(c={center}, r={radius}, base={base}, h={height})"),
            Profile::Constant(c) => write!(f, "constant({c})"),
            Profile::Linear { slope } => write!(f, "linear({slope})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn smoothed_step_definition() {
        let p = Profile::from_name(
            "smoothed-step",
            &PresetParams {
                left: 2.0,
                right: 0.0,
                width: 0.3,
                ..Default::default()
            },
        )
        .unwrap();
        for x in [-1.0, -0.1, 0.0, 0.4] {
            let expect = 0.0 + (2.0 - 0.0) * (1.0 - (x / 0.3f64).tanh()) / 2.0;
            assert_abs_diff_eq!(p.value(x), expect, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(p.value(-20.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let all = [
            Profile::SmoothedStep {
                left: 2.0,
                right: -1.0,
                width: 0.5,
            },
            Profile::NegTanh { amplitude: 1.0 },
            Profile::NegSin { amplitude: 0.7 },
            Profile::Bump {
                center: 0.3,
                radius: 1.2,
                base: 1.0,
                height: 0.5,
            },
            Profile::Linear { slope: -2.0 },
        ];
        let h = 1e-5;
        for p in all {
            for x in [-0.9, -0.2, 0.0, 0.35, 1.1] {
                let fd = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(fd, p.derivative(x), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn bump_peak_and_support() {
        let p = Profile::Bump {
            center: 1.0,
            radius: 0.5,
            base: 1.0,
            height: 2.0,
        };
        assert_abs_diff_eq!(p.value(1.0), 3.0, epsilon = 1e-15);
        assert_eq!(p.value(1.5), 1.0);
        assert_eq!(p.value(0.2), 1.0);
    }

    #[test]
    fn unknown_name() {
        assert_eq!(
            Profile::from_name("square", &PresetParams::default()),
            Err(InitialError::Unknown("square".into()))
        );
        assert_eq!(PRESETS.len(), 5);
        for (name, _) in PRESETS {
            assert!(Profile::from_name(name, &PresetParams::default()).is_ok());
        }
    }
}
