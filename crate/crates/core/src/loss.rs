//! The coherence loss family and the classical margin surrogates.
//!
//! All losses are functions of the margin `z = y f(x)`. The coherence
//! function `V(z) = rho * log(1 + exp((u - z) / rho))` is the smooth
//! majorizer of the shifted hinge `[u - z]_+`; the C-loss rescales it so its
//! value at `z = 0` equals `u`, and the L-variant so that value is one.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// `log(1 + exp(t))` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + exp(-t))`.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(t) * (1 - sigmoid(t))`, accurate in both tails.
#[inline]
pub(crate) fn sigmoid_var(t: f64) -> f64 {
    let e = (-t.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Temperature `rho` and margin target `u` of the coherence family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    rho: f64,
    u: f64,
}

impl LossParams {
    pub fn new(rho: f64, u: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        if !(u.is_finite() && u >= 0.0) {
            return Err(Error::InvalidParameter(format!("u must be nonnegative, got {u}")));
        }
        Ok(Self { rho, u })
    }

    /// `rho` with the unit margin target used by C-learning.
    pub fn unit_margin(rho: f64) -> Result<Self> {
        Self::new(rho, 1.0)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    /// `log(1 + exp(u / rho))`, the normalizer shared by the C- and L-losses.
    pub(crate) fn normalizer(&self) -> f64 {
        softplus(self.u / self.rho)
    }

    fn require_positive_u(&self) -> Result<()> {
        if self.u > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("the C-loss requires u > 0".into()))
        }
    }
}

/// Every loss this module can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    CoherenceV,
    CLoss,
    LLoss,
    Hinge,
    Logit,
    Exponential,
    SquaredHinge,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 7] = [
        SurrogateKind::CoherenceV,
        SurrogateKind::CLoss,
        SurrogateKind::LLoss,
        SurrogateKind::Hinge,
        SurrogateKind::Logit,
        SurrogateKind::Exponential,
        SurrogateKind::SquaredHinge,
    ];

    /// True for the members parameterized by `(rho, u)`.
    pub fn is_coherence(self) -> bool {
        matches!(self, SurrogateKind::CoherenceV | SurrogateKind::CLoss | SurrogateKind::LLoss)
    }

    /// Evaluate any kind; classical kinds ignore `p`.
    pub fn eval(self, p: LossParams, z: f64) -> Result<f64> {
        match self {
            SurrogateKind::CoherenceV => coherence_v(p, z),
            SurrogateKind::CLoss => c_loss(p, z),
            SurrogateKind::LLoss => l_loss(p, z),
            other => classical_surrogate(other, z),
        }
    }
}

/// Coherence function `V(z) = rho * log(1 + exp((u - z) / rho))`.
pub fn coherence_v(p: LossParams, z: f64) -> Result<f64> {
    let z = check_finite("z", z)?;
    Ok(p.rho * softplus((p.u - z) / p.rho))
}

/// C-loss `u / log(1 + exp(u/rho)) * log(1 + exp((u - z)/rho))`.
pub fn c_loss(p: LossParams, z: f64) -> Result<f64> {
    p.require_positive_u()?;
    let z = check_finite("z", z)?;
    Ok(p.u * softplus((p.u - z) / p.rho) / p.normalizer())
}

/// L-variant `log(1 + exp((u - z)/rho)) / log(1 + exp(u/rho))`; equals 1 at `z = 0`.
pub fn l_loss(p: LossParams, z: f64) -> Result<f64> {
    let z = check_finite("z", z)?;
    Ok(softplus((p.u - z) / p.rho) / p.normalizer())
}

/// First derivative of the C-loss in `z`; always in `[-1, 0]`.
pub fn c_loss_grad(p: LossParams, z: f64) -> Result<f64> {
    p.require_positive_u()?;
    let z = check_finite("z", z)?;
    let scale = p.u / (p.rho * p.normalizer());
    Ok(-scale * sigmoid((p.u - z) / p.rho))
}

/// Second derivative of the C-loss in `z`.
pub fn c_loss_hess(p: LossParams, z: f64) -> Result<f64> {
    p.require_positive_u()?;
    let z = check_finite("z", z)?;
    let scale = p.u / (p.rho * p.rho * p.normalizer());
    Ok(scale * sigmoid_var((p.u - z) / p.rho))
}

/// The parameter-free surrogates, each scaled to equal 1 at `z = 0`.
pub fn classical_surrogate(kind: SurrogateKind, z: f64) -> Result<f64> {
    let z = check_finite("z", z)?;
    match kind {
        SurrogateKind::Hinge => Ok((1.0 - z).max(0.0)),
        SurrogateKind::Logit => Ok(softplus(-z) / std::f64::consts::LN_2),
        SurrogateKind::Exponential => Ok((-z / 2.0).exp()),
        SurrogateKind::SquaredHinge => {
            let h = (1.0 - z).max(0.0);
            Ok(h * h)
        }
        k => Err(Error::InvalidArgument(format!(
            "{k:?} is a coherence loss and needs (rho, u) parameters"
        ))),
    }
}
