//! Pointwise losses `ℓ(f, y)` and their derivatives in `f`.
//!
//! The Huber loss switches from `|f-y|²` to `2|f-y| - 1` at `|f-y| = 1`,
//! so that value and slope are continuous there.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum LossKind {
    #[default]
    Mse,
    L1,
    Huber,
    PseudoHuber,
}

impl LossKind {
    pub fn value(self, f: f64, y: f64) -> f64 {
        let r = (f - y).abs();
        match self {
            LossKind::Mse => r * r,
            LossKind::L1 => r,
            LossKind::Huber => {
                if r < 1.0 {
                    r * r
                } else {
                    2.0 * r - 1.0
                }
            }
            LossKind::PseudoHuber => (1.0 + r * r).sqrt() - 1.0,
        }
    }

    /// `∂ℓ/∂f`. The L1 derivative at `f = y` is 0; at the Huber kink the
    /// quadratic branch is used.
    pub fn derivative(self, f: f64, y: f64) -> f64 {
        let diff = f - y;
        match self {
            LossKind::Mse => 2.0 * diff,
            LossKind::L1 => {
                if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::Huber => {
                if diff.abs() <= 1.0 {
                    2.0 * diff
                } else {
                    2.0 * diff.signum()
                }
            }
            LossKind::PseudoHuber => diff / (1.0 + diff * diff).sqrt(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::L1 => "l1",
            LossKind::Huber => "huber",
            LossKind::PseudoHuber => "pseudo_huber",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "l1" => Ok(LossKind::L1),
            "huber" => Ok(LossKind::Huber),
            "pseudo_huber" => Ok(LossKind::PseudoHuber),
            other => Err(Error::domain(format!("unknown loss kind {other:?}"))),
        }
    }
}

pub fn loss_value(kind: LossKind, f: f64, y: f64) -> f64 {
    kind.value(f, y)
}

pub fn loss_derivative(kind: LossKind, f: f64, y: f64) -> f64 {
    kind.derivative(f, y)
}
