use serde::{Deserialize, Serialize};

/// Elementwise nonlinearity applied after a dense layer's affine map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    Identity,
    Relu,
    Elu { alpha: f64 },
}

impl Activation {
    pub const ELU: Activation = Activation::Elu { alpha: 1.0 };

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Elu { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x.exp_m1()
                }
            }
        }
    }

    /// Derivative at `x`, given the already computed output `y = apply(x)`.
    ///
    /// ReLU's derivative at exactly zero is taken as 0.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu { alpha } => {
                if x > 0.0 {
                    1.0
                } else {
                    y + alpha
                }
            }
        }
    }

    pub fn validate(self) -> crate::Result<()> {
        match self {
            Activation::Elu { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                crate::Error::Config(format!("ELU alpha must be positive, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }
}

/// `activation_apply` in function form.
pub fn activation_apply(kind: Activation, x: f64) -> f64 {
    kind.apply(x)
}
