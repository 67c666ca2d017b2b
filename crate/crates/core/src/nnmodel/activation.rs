use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Hidden-unit nonlinearity. Inputs to `psi` always lie in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// `a * tanh(c z)`.
    Tanh { a: f64, c: f64 },
    /// `a * max(z, 0)^2`.
    SquaredRelu { a: f64 },
}

/// Sup bounds of `|psi|`, `|psi'|`, `|psi''|` on `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl DerivativeBounds {
    /// The bound formulas assume every constant is at least one.
    pub fn clamped(self) -> Self {
        DerivativeBounds {
            a0: self.a0.max(1.0),
            a1: self.a1.max(1.0),
            a2: self.a2.max(1.0),
        }
    }
}

impl Activation {
    pub fn tanh(a: f64, c: f64) -> Result<Self> {
        let act = Activation::Tanh { a, c };
        act.validate()?;
        Ok(act)
    }

    pub fn squared_relu(a: f64) -> Result<Self> {
        let act = Activation::SquaredRelu { a };
        act.validate()?;
        Ok(act)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Activation::Tanh { a, c } => a.is_finite() && c.is_finite() && a > 0.0 && c > 0.0,
            Activation::SquaredRelu { a } => a.is_finite() && a > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(config_err(format!(
                "activation parameters must be positive: {self:?}"
            )))
        }
    }

    pub fn is_odd(&self) -> bool {
        matches!(self, Activation::Tanh { .. })
    }

    #[inline]
    pub fn psi(&self, z: f64) -> f64 {
        match *self {
            Activation::Tanh { a, c } => a * (c * z).tanh(),
            Activation::SquaredRelu { a } => {
                let p = z.max(0.0);
                a * p * p
            }
        }
    }

    #[inline]
    pub fn dpsi(&self, z: f64) -> f64 {
        match *self {
            Activation::Tanh { a, c } => {
                let t = (c * z).tanh();
                a * c * (1.0 - t * t)
            }
            Activation::SquaredRelu { a } => 2.0 * a * z.max(0.0),
        }
    }

    #[inline]
    pub fn d2psi(&self, z: f64) -> f64 {
        match *self {
            Activation::Tanh { a, c } => {
                let t = (c * z).tanh();
                -2.0 * a * c * c * t * (1.0 - t * t)
            }
            Activation::SquaredRelu { a } => {
                if z > 0.0 {
                    2.0 * a
                } else {
                    0.0
                }
            }
        }
    }

    /// `(psi, psi', psi'')` in one pass.
    #[inline]
    pub fn eval_all(&self, z: f64) -> (f64, f64, f64) {
        match *self {
            Activation::Tanh { a, c } => {
                let t = (c * z).tanh();
                let s = 1.0 - t * t;
                (a * t, a * c * s, -2.0 * a * c * c * t * s)
            }
            Activation::SquaredRelu { a } => {
                let p = z.max(0.0);
                let h = if z > 0.0 { 2.0 * a } else { 0.0 };
                (a * p * p, 2.0 * a * p, h)
            }
        }
    }

    /// Analytic sup bounds on `[-1, 1]`.
    ///
    /// For tanh, `|d2/dz2 tanh(cz)| <= c^2 * 4/(3 sqrt 3)` over the whole line.
    pub fn bounds(&self) -> DerivativeBounds {
        match *self {
            Activation::Tanh { a, c } => DerivativeBounds {
                a0: a * c.tanh(),
                a1: a * c,
                a2: a * c * c * 4.0 / (3.0 * 3f64.sqrt()),
            },
            Activation::SquaredRelu { a } => DerivativeBounds {
                a0: a,
                a1: 2.0 * a,
                a2: 2.0 * a,
            },
        }
    }

    /// Bounds clamped to at least one, as used by every constant in the theory.
    pub fn theory_bounds(&self) -> DerivativeBounds {
        self.bounds().clamped()
    }
}
