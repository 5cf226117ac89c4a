use num_traits::Float;

use crate::error::{Error, Result};

/// Penalty applied to the pixel distance of each correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
#[derive(Default)]
pub enum LossKind {
    /// `r^2`
    #[default]
    Squared,
    /// `ln(1 + (r / scale)^2)`, scale in pixels.
    Cauchy { scale: f64 },
}

impl LossKind {
    /// Cauchy loss with unit scale, i.e. exactly `ln(1 + r^2)`.
    pub fn cauchy() -> Self {
        LossKind::Cauchy { scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::Squared => Ok(()),
            LossKind::Cauchy { scale } if scale > 0.0 && scale.is_finite() => Ok(()),
            LossKind::Cauchy { .. } => Err(Error::InvalidOptions("cauchy scale must be positive")),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        loss_value_and_weight(*self, r).0
    }
}

/// Loss value at residual norm `r` and the IRLS weight `L'(r) / r`, up to a
/// constant factor shared by all residuals.
pub fn loss_value_and_weight(kind: LossKind, r: f64) -> (f64, f64) {
    match kind {
        LossKind::Squared => (r * r, 1.0),
        LossKind::Cauchy { scale } => {
            let z = (r / scale) * (r / scale);
            (Float::ln_1p(z), 1.0 / (1.0 + z))
        }
    }
}
