//! Proximal calculus for the supported losses and penalties.
//!
//! Every family here has a closed-form proximal operator, so the solvers and
//! the quadrature layer never run an inner optimization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth convex loss applied to residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `x^2 / 2`
    Square,
    /// `x^2 / (2 rho)` inside `[-rho, rho]`, `|x| - rho / 2` outside.
    Huber { rho: f64 },
}

/// Separable convex penalty applied coordinate-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegSpec {
    /// `lambda1 x^2 / 2`
    Ridge { lambda1: f64 },
    /// `lambda2 |x|`
    Lasso { lambda2: f64 },
    /// `lambda1 x^2 / 2 + lambda2 |x|`
    ElasticNet { lambda1: f64, lambda2: f64 },
    None,
}

/// Shared interface of scalar functions with a closed-form proximal map.
pub trait Prox {
    /// `argmin_y f(y) + (x - y)^2 / (2 tau)`; `tau > 0` is the caller's job.
    fn prox(&self, x: f64, tau: f64) -> f64;

    /// Derivative of `prox` in `x`, right-continuous at kinks.
    fn prox_prime(&self, x: f64, tau: f64) -> f64;

    /// Points in `x` where `prox_prime` jumps.
    fn kinks(&self, tau: f64) -> Vec<f64>;

    fn value(&self, x: f64) -> f64;

    /// Derivative of the Moreau envelope, `(x - prox(x)) / tau`.
    fn env_prime(&self, x: f64, tau: f64) -> f64 {
        (x - self.prox(x, tau)) / tau
    }

    /// Derivative of `env_prime` in `x`, `(1 - prox_prime) / tau`.
    fn env_second(&self, x: f64, tau: f64) -> f64 {
        (1.0 - self.prox_prime(x, tau)) / tau
    }
}

/// `(|x| - t)_+ sign(x)`
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

impl LossSpec {
    pub fn huber(rho: f64) -> Self {
        LossSpec::Huber { rho }
    }

    /// Lipschitz constant of the derivative.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            LossSpec::Square => 1.0,
            LossSpec::Huber { rho } => 1.0 / rho,
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            LossSpec::Square => r,
            LossSpec::Huber { rho } => (r / rho).clamp(-1.0, 1.0),
        }
    }

    /// Second derivative; Huber counts `|r| = rho` as inside.
    pub fn second(&self, r: f64) -> f64 {
        match *self {
            LossSpec::Square => 1.0,
            LossSpec::Huber { rho } => {
                if r.abs() <= rho {
                    1.0 / rho
                } else {
                    0.0
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Square => Ok(()),
            LossSpec::Huber { rho } if rho > 0.0 && rho.is_finite() => Ok(()),
            LossSpec::Huber { rho } => Err(Error::Domain(format!("Huber threshold must be positive, got {rho}"))),
        }
    }
}

impl Prox for LossSpec {
    fn prox(&self, x: f64, tau: f64) -> f64 {
        match *self {
            LossSpec::Square => x / (1.0 + tau),
            LossSpec::Huber { rho } => {
                if x.abs() < rho + tau {
                    x * rho / (rho + tau)
                } else {
                    x - tau * x.signum()
                }
            }
        }
    }

    fn prox_prime(&self, x: f64, tau: f64) -> f64 {
        match *self {
            LossSpec::Square => 1.0 / (1.0 + tau),
            LossSpec::Huber { rho } => {
                if x.abs() < rho + tau {
                    rho / (rho + tau)
                } else {
                    1.0
                }
            }
        }
    }

    fn kinks(&self, tau: f64) -> Vec<f64> {
        match *self {
            LossSpec::Square => Vec::new(),
            LossSpec::Huber { rho } => vec![-(rho + tau), rho + tau],
        }
    }

    fn value(&self, x: f64) -> f64 {
        match *self {
            LossSpec::Square => 0.5 * x * x,
            LossSpec::Huber { rho } => {
                if x.abs() <= rho {
                    x * x / (2.0 * rho)
                } else {
                    x.abs() - 0.5 * rho
                }
            }
        }
    }

    fn env_prime(&self, x: f64, tau: f64) -> f64 {
        match *self {
            LossSpec::Square => x / (1.0 + tau),
            LossSpec::Huber { rho } => (x / (rho + tau)).clamp(-1.0, 1.0),
        }
    }
}

impl RegSpec {
    pub fn ridge(lambda1: f64) -> Self {
        RegSpec::Ridge { lambda1 }
    }

    pub fn lasso(lambda2: f64) -> Self {
        RegSpec::Lasso { lambda2 }
    }

    pub fn elastic_net(lambda1: f64, lambda2: f64) -> Self {
        RegSpec::ElasticNet { lambda1, lambda2 }
    }

    /// Quadratic coefficient `lambda1`.
    pub fn l2(&self) -> f64 {
        match *self {
            RegSpec::Ridge { lambda1 } | RegSpec::ElasticNet { lambda1, .. } => lambda1,
            _ => 0.0,
        }
    }

    /// Absolute-value coefficient `lambda2`.
    pub fn l1(&self) -> f64 {
        match *self {
            RegSpec::Lasso { lambda2 } | RegSpec::ElasticNet { lambda2, .. } => lambda2,
            _ => 0.0,
        }
    }

    /// Collapses zero coefficients: `Ridge(0)`, `Lasso(0)` and `ElasticNet(0, 0)`
    /// become `None`, a one-sided elastic net becomes ridge or lasso.
    pub fn canonical(&self) -> RegSpec {
        match (self.l2() > 0.0, self.l1() > 0.0) {
            (false, false) => RegSpec::None,
            (true, false) => RegSpec::Ridge { lambda1: self.l2() },
            (false, true) => RegSpec::Lasso { lambda2: self.l1() },
            (true, true) => RegSpec::ElasticNet { lambda1: self.l2(), lambda2: self.l1() },
        }
    }

    pub fn is_strongly_convex(&self) -> bool {
        self.l2() > 0.0
    }

    /// Scalar level used when the penalty is read as `lambda * unit penalty`:
    /// `lambda1` for ridge, `lambda2` whenever an l1 part is present.
    pub fn level(&self) -> f64 {
        match self.canonical() {
            RegSpec::Ridge { lambda1 } => lambda1,
            RegSpec::Lasso { lambda2 } | RegSpec::ElasticNet { lambda2, .. } => lambda2,
            RegSpec::None => 0.0,
        }
    }

    /// Same penalty family with its level replaced: ridge sets `lambda1`,
    /// lasso and elastic net set `lambda2` (keeping `lambda1`).
    pub fn with_level(&self, level: f64) -> RegSpec {
        match *self {
            RegSpec::Ridge { .. } => RegSpec::Ridge { lambda1: level },
            RegSpec::Lasso { .. } => RegSpec::Lasso { lambda2: level },
            RegSpec::ElasticNet { lambda1, .. } => RegSpec::ElasticNet { lambda1, lambda2: level },
            RegSpec::None => RegSpec::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.l2(), self.l1());
        if a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("penalty coefficients must be finite and non-negative, got {self:?}")))
        }
    }
}

impl Prox for RegSpec {
    fn prox(&self, x: f64, tau: f64) -> f64 {
        soft_threshold(x, self.l1() * tau) / (1.0 + self.l2() * tau)
    }

    fn prox_prime(&self, x: f64, tau: f64) -> f64 {
        if x.abs() >= self.l1() * tau {
            1.0 / (1.0 + self.l2() * tau)
        } else {
            0.0
        }
    }

    fn kinks(&self, tau: f64) -> Vec<f64> {
        let t = self.l1() * tau;
        if t > 0.0 {
            vec![-t, t]
        } else {
            Vec::new()
        }
    }

    fn value(&self, x: f64) -> f64 {
        0.5 * self.l2() * x * x + self.l1() * x.abs()
    }
}

/// Either side of the proximal calculus, for the checked free functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spec {
    Loss(LossSpec),
    Reg(RegSpec),
}

impl From<LossSpec> for Spec {
    fn from(s: LossSpec) -> Self {
        Spec::Loss(s)
    }
}

impl From<RegSpec> for Spec {
    fn from(s: RegSpec) -> Self {
        Spec::Reg(s)
    }
}

impl Spec {
    fn as_prox(&self) -> &dyn Prox {
        match self {
            Spec::Loss(l) => l,
            Spec::Reg(r) => r,
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("prox parameter must be positive, got {tau}")))
    }
}

pub fn prox(spec: impl Into<Spec>, x: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(spec.into().as_prox().prox(x, tau))
}

pub fn prox_prime(spec: impl Into<Spec>, x: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(spec.into().as_prox().prox_prime(x, tau))
}

pub fn env_prime(spec: impl Into<Spec>, x: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(spec.into().as_prox().env_prime(x, tau))
}

/// Coordinate-wise loss derivative, the vector `psi` of a fit.
pub fn loss_grad(spec: &LossSpec, r: &[f64]) -> Vec<f64> {
    r.iter().map(|&v| spec.derivative(v)).collect()
}
