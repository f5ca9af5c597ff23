//! Elementwise activation functions and their first derivatives.
//!
//! `Relu` and `GaussianSoftplus` are the convex non-decreasing kinds the
//! convex-path layers are restricted to. `Step` and `NormCdf` are their
//! derivatives; they appear as graph operations because the quantile map
//! propagates tangents through the network explicitly.

use super::real::Real;
use super::special::{normal_cdf, normal_pdf};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActKind {
    Relu,
    /// g(x) = x·Φ(x) + φ(x); smooth convex upper envelope of ReLU with
    /// derivative Φ(x).
    GaussianSoftplus,
    Sigmoid,
    Tanh,
    /// Derivative of ReLU: 1 for x > 0, else 0.
    Step,
    /// Derivative of the Gaussian softplus: Φ(x).
    NormCdf,
}

impl ActKind {
    /// Parse a configuration name. Only the four user-facing kinds are valid.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(ActKind::Relu),
            "gaussian-softplus" => Ok(ActKind::GaussianSoftplus),
            "sigmoid" => Ok(ActKind::Sigmoid),
            "tanh" => Ok(ActKind::Tanh),
            other => Err(Error::Config(format!("unknown activation kind `{other}`"))),
        }
    }

    /// Short code used in activation-combination strings: r = ReLU,
    /// g = Gaussian softplus.
    pub fn parse_code(c: char) -> Result<Self> {
        match c {
            'r' => Ok(ActKind::Relu),
            'g' => Ok(ActKind::GaussianSoftplus),
            other => Err(Error::Config(format!(
                "unknown activation code `{other}` (expected r or g)"
            ))),
        }
    }

    pub fn code(self) -> Option<char> {
        match self {
            ActKind::Relu => Some('r'),
            ActKind::GaussianSoftplus => Some('g'),
            _ => None,
        }
    }

    /// Convex and non-decreasing, as required on the convex input path.
    pub fn is_convex_nondecreasing(self) -> bool {
        matches!(self, ActKind::Relu | ActKind::GaussianSoftplus)
    }

    pub fn apply<R: Real>(self, x: R) -> R {
        match self {
            ActKind::Relu => {
                if x > R::zero() {
                    x
                } else {
                    R::zero()
                }
            }
            ActKind::GaussianSoftplus => x * normal_cdf(x) + normal_pdf(x),
            ActKind::Sigmoid => R::one() / (R::one() + (-x).exp()),
            ActKind::Tanh => x.tanh(),
            ActKind::Step => {
                if x > R::zero() {
                    R::one()
                } else {
                    R::zero()
                }
            }
            ActKind::NormCdf => normal_cdf(x),
        }
    }

    /// d(apply)/dx given the input and the already-computed output.
    pub fn derivative<R: Real>(self, x: R, y: R) -> R {
        match self {
            ActKind::Relu => {
                if x > R::zero() {
                    R::one()
                } else {
                    R::zero()
                }
            }
            ActKind::GaussianSoftplus => normal_cdf(x),
            ActKind::Sigmoid => y * (R::one() - y),
            ActKind::Tanh => R::one() - y * y,
            // Zero almost everywhere; the kink at 0 gets subgradient 0.
            ActKind::Step => R::zero(),
            ActKind::NormCdf => normal_pdf(x),
        }
    }

    /// Graph-op kind computing this activation's derivative, where one exists
    /// as a supported elementwise map.
    pub fn derivative_kind(self) -> Result<ActKind> {
        match self {
            ActKind::Relu => Ok(ActKind::Step),
            ActKind::GaussianSoftplus => Ok(ActKind::NormCdf),
            other => Err(Error::Config(format!(
                "no derivative op registered for {other:?}"
            ))),
        }
    }
}

/// Activation evaluated at a scalar, by kind.
pub fn eval_activation<R: Real>(kind: ActKind, x: R) -> Result<R> {
    if !x.is_finite() {
        return Err(Error::Contract("activation input must be finite".into()));
    }
    Ok(kind.apply(x))
}

/// Parse an activation-combination string such as "rg" into per-layer kinds.
pub fn parse_combination(s: &str) -> Result<Vec<ActKind>> {
    if s.is_empty() {
        return Err(Error::Config("empty activation combination".into()));
    }
    s.chars().map(ActKind::parse_code).collect()
}
