use std::fmt;
use std::str::FromStr;

use super::{Matrix, NumericsError};

/// Predictions are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Binary cross-entropy, averaged over every element.
    Bce,
    /// Mean squared error, averaged over every element.
    Mse,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Mse => "mse",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bce" => Ok(LossKind::Bce),
            "mse" => Ok(LossKind::Mse),
            other => Err(format!("unknown loss `{other}` (expected bce or mse)")),
        }
    }
}

#[inline]
fn clamp_probability(p: f64) -> f64 {
    p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

pub fn loss(kind: LossKind, predicted: &Matrix, target: &Matrix) -> Result<f64, NumericsError> {
    predicted.check_same_shape("loss", target)?;
    let n = predicted.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let pairs = predicted.as_slice().iter().zip(target.as_slice());
    let total: f64 = match kind {
        LossKind::Mse => pairs.map(|(&p, &t)| (p - t) * (p - t)).sum(),
        LossKind::Bce => pairs
            .map(|(&p, &t)| {
                let p = clamp_probability(p);
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum(),
    };
    Ok(total / n as f64)
}

/// Gradient of [`loss`] with respect to each prediction.
pub fn loss_gradient(
    kind: LossKind,
    predicted: &Matrix,
    target: &Matrix,
) -> Result<Matrix, NumericsError> {
    predicted.check_same_shape("loss_gradient", target)?;
    let n = predicted.as_slice().len().max(1) as f64;
    predicted.zip_map(target, |p, t| match kind {
        LossKind::Mse => 2.0 * (p - t) / n,
        LossKind::Bce => {
            if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p) {
                // clamped region is flat
                0.0
            } else {
                (p - t) / (p * (1.0 - p)) / n
            }
        }
    })
}
