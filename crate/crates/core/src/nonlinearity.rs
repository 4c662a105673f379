//! Local nonlinearities `beta(s)`, `s = |u|^2`, entering `i u_t + Δu + beta(|u|^2) u = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// `beta(s) = s^((p-1)/2)`, i.e. `|u|^(p-1) u`.
    PurePower { p: f64 },
    /// `beta(s) = s / (1 + s / scale)`; saturates at `scale` for large amplitudes.
    Saturable { scale: f64 },
    /// `beta(s) = cubic * s + quintic * s^2`.
    CubicQuintic { cubic: f64, quintic: f64 },
}

impl Nonlinearity {
    pub fn cubic() -> Self {
        Nonlinearity::PurePower { p: 3.0 }
    }

    pub fn saturable() -> Self {
        Nonlinearity::Saturable { scale: 1.0 }
    }

    /// The linear equation, `beta = 0`.
    pub fn zero() -> Self {
        Nonlinearity::CubicQuintic {
            cubic: 0.0,
            quintic: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Nonlinearity::PurePower { p } => {
                if !(p > 1.0 && p < 5.0) {
                    return Err(Error::InvalidInput(format!(
                        "pure power exponent must satisfy 1 < p < 5, got {p}"
                    )));
                }
            }
            Nonlinearity::Saturable { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "saturation scale must be positive, got {scale}"
                    )));
                }
            }
            Nonlinearity::CubicQuintic { cubic, quintic } => {
                if !cubic.is_finite() || !quintic.is_finite() {
                    return Err(Error::InvalidInput("non-finite coefficient".into()));
                }
            }
        }
        Ok(())
    }

    pub fn beta(&self, s: f64) -> f64 {
        self.derivative(0, s)
    }

    pub fn beta1(&self, s: f64) -> f64 {
        self.derivative(1, s)
    }

    pub fn beta2(&self, s: f64) -> f64 {
        self.derivative(2, s)
    }

    pub fn beta3(&self, s: f64) -> f64 {
        self.derivative(3, s)
    }

    /// `k`-th derivative of `beta` at `s >= 0`.
    pub fn derivative(&self, k: usize, s: f64) -> f64 {
        match *self {
            Nonlinearity::PurePower { p } => {
                let a = 0.5 * (p - 1.0);
                let mut coef = 1.0;
                for i in 0..k {
                    coef *= a - i as f64;
                }
                if coef == 0.0 {
                    0.0
                } else if s == 0.0 {
                    let e = a - k as f64;
                    if e > 0.0 {
                        0.0
                    } else if e == 0.0 {
                        coef
                    } else {
                        f64::INFINITY
                    }
                } else {
                    coef * s.powf(a - k as f64)
                }
            }
            Nonlinearity::Saturable { scale } => {
                // beta = scale - scale^2 / (scale + s)
                let d = scale + s;
                if k == 0 {
                    scale * s / d
                } else {
                    let mut fact = 1.0;
                    for i in 1..=k {
                        fact *= i as f64;
                    }
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * scale * scale * fact / d.powi(k as i32 + 1)
                }
            }
            Nonlinearity::CubicQuintic { cubic, quintic } => match k {
                0 => cubic * s + quintic * s * s,
                1 => cubic + 2.0 * quintic * s,
                2 => 2.0 * quintic,
                _ => 0.0,
            },
        }
    }

    /// Primitive `F(s) = ∫_0^s beta`, used only for the energy diagnostic.
    pub fn primitive(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::PurePower { p } => {
                let a = 0.5 * (p - 1.0);
                s.powf(a + 1.0) / (a + 1.0)
            }
            Nonlinearity::Saturable { scale } => scale * s - scale * scale * (s / scale).ln_1p(),
            Nonlinearity::CubicQuintic { cubic, quintic } => {
                0.5 * cubic * s * s + quintic * s * s * s / 3.0
            }
        }
    }

    /// Number of continuous derivatives of `beta` on `[0, ∞)`; `usize::MAX` when smooth.
    pub fn smoothness(&self) -> usize {
        match *self {
            Nonlinearity::PurePower { p } => {
                let a = 0.5 * (p - 1.0);
                if (a - a.round()).abs() < 1e-12 {
                    usize::MAX
                } else {
                    a.floor() as usize
                }
            }
            _ => usize::MAX,
        }
    }

    /// Pure power exponent, when the scaling law `phi_w(r) = w^{1/(p-1)} phi_1(√w r)` applies.
    pub fn power_exponent(&self) -> Option<f64> {
        match *self {
            Nonlinearity::PurePower { p } => Some(p),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Nonlinearity::CubicQuintic { cubic, quintic } if *cubic == 0.0 && *quintic == 0.0)
    }

    /// Upper bound of `beta` on `[0, ∞)`, if finite.
    pub fn supremum(&self) -> Option<f64> {
        match *self {
            Nonlinearity::Saturable { scale } => Some(scale),
            Nonlinearity::CubicQuintic { cubic, quintic } if quintic < 0.0 => {
                Some((-cubic * cubic / (4.0 * quintic)).max(0.0))
            }
            Nonlinearity::CubicQuintic { quintic, cubic } if quintic == 0.0 && cubic <= 0.0 => {
                Some(0.0)
            }
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Nonlinearity::PurePower { p } => format!("power(p={p})"),
            Nonlinearity::Saturable { scale } => format!("saturable(scale={scale})"),
            Nonlinearity::CubicQuintic { cubic, quintic } => {
                format!("cubic-quintic({cubic},{quintic})")
            }
        }
    }
}
