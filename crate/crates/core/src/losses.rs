//! The 0-1 loss and its convex surrogates, as functions of the score `s = f(x)`.
//!
//! Both surrogates are convex and 1-Lipschitz in the score, so their score
//! derivative is bounded by 1 in absolute value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{MomError, Result};

/// Above this margin `log(1 + e^z)` is evaluated as `z + log1p(e^-z)`.
const LOGISTIC_OVERFLOW: f64 = 35.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `1{y * sign(s) <= 0}`, evaluation only.
    ZeroOne,
    /// `max(0, 1 - y s)`.
    Hinge,
    /// `log(1 + exp(-y s))`.
    Logistic,
}

impl LossKind {
    pub fn value(self, score: f64, y: Label) -> Result<f64> {
        check_score(score)?;
        Ok(self.value_unchecked(score, y))
    }

    /// Derivative of the loss with respect to the score. The hinge kink at
    /// `y s = 1` gets the subgradient 0.
    pub fn grad_score(self, score: f64, y: Label) -> Result<f64> {
        check_score(score)?;
        match self {
            LossKind::ZeroOne => Err(MomError::Unsupported("the 0-1 loss has no gradient".into())),
            _ => Ok(self.grad_score_unchecked(score, y)),
        }
    }

    pub fn is_differentiable(self) -> bool {
        !matches!(self, LossKind::ZeroOne)
    }

    #[inline]
    pub(crate) fn value_unchecked(self, score: f64, y: Label) -> f64 {
        let margin = y.sign() * score;
        match self {
            LossKind::ZeroOne => {
                if Label::from_score(score) == y {
                    0.0
                } else {
                    1.0
                }
            }
            LossKind::Hinge => (1.0 - margin).max(0.0),
            LossKind::Logistic => softplus(-margin),
        }
    }

    #[inline]
    pub(crate) fn grad_score_unchecked(self, score: f64, y: Label) -> f64 {
        let ys = y.sign();
        let margin = ys * score;
        match self {
            LossKind::ZeroOne => 0.0,
            LossKind::Hinge => {
                if margin < 1.0 {
                    -ys
                } else {
                    0.0
                }
            }
            LossKind::Logistic => -ys * sigmoid(-margin),
        }
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > LOGISTIC_OVERFLOW {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_score(score: f64) -> Result<()> {
    if score.is_finite() {
        Ok(())
    } else {
        Err(MomError::Domain(format!("non-finite score {score}")))
    }
}

impl FromStr for LossKind {
    type Err = MomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-one" => Ok(LossKind::ZeroOne),
            "hinge" => Ok(LossKind::Hinge),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(MomError::argument(format!(
                "unknown loss {other:?} (expected zero-one, hinge or logistic)"
            ))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::ZeroOne => "zero-one",
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
        })
    }
}
