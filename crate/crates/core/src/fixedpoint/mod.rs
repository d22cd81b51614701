//! Deterministic limits of subagged M-estimators.
//!
//! [`Engine`] bundles the signal and noise laws with their integrators and
//! exposes the scalar systems: the four-variable system for one estimator
//! ([`Engine::solve_sys1a`]), the correlation pair for two estimators
//! ([`Engine::solve_sys1b`]), the square-loss reductions ([`Engine::solve_sys2`],
//! [`Engine::solve_sys4`]) and the ridge reduction ([`Engine::solve_sys3`]).

mod lsq;
mod risk;
mod sweep;
mod sys1a;
mod sys1b;
mod sys3;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::prox::{LossSpec, Prox, RegSpec};
use crate::randmodel::{NoiseDist, NoiseIntegrator, QuadratureConfig, SignalDist, SignalIntegrator};

pub use lsq::{solve_sys2, solve_sys4, Interpolator, LsqSolution};
pub use risk::{ensemble_risk, homogeneous_risk, CellTheory, CorrMatrix, RiskReport};
pub use sweep::{sweep, SweepGrid, SweepRow};
pub use sys1a::{ridge_square_closed_form, solve_sys1a, SYS1A_TOL};
pub use sys1b::{CorrSolution, Member, SYS1B_MAX_ITER, SYS1B_TOL};
pub use sys3::solve_sys3;

/// Solution `(alpha, beta, kappa, nu)` of the single-estimator system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSolution {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub nu: f64,
    /// Largest absolute defect over the four defining equations.
    pub residual: f64,
}

/// One ensemble member: loss, penalty and subsample ratio `k / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub loss: LossSpec,
    pub reg: RegSpec,
    pub c: f64,
}

/// Number of ensemble members; `Infinite` is the full-ensemble limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleSize {
    Finite(usize),
    Infinite,
}

impl EnsembleSize {
    /// `1 / M`, zero in the limit.
    pub fn inverse(&self) -> f64 {
        match *self {
            EnsembleSize::Finite(m) => 1.0 / m as f64,
            EnsembleSize::Infinite => 0.0,
        }
    }
}

impl std::fmt::Display for EnsembleSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnsembleSize::Finite(m) => write!(f, "{m}"),
            EnsembleSize::Infinite => write!(f, "inf"),
        }
    }
}

/// A single component is replicated `size` times; otherwise `components`
/// lists every member and `size` must match its length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub delta: f64,
    pub components: Vec<Component>,
    pub size: EnsembleSize,
}

impl EnsembleConfig {
    pub fn homogeneous(delta: f64, component: Component, size: EnsembleSize) -> Self {
        Self { delta, components: vec![component], size }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.components.len() == 1 || self.components.windows(2).all(|w| w[0] == w[1])
    }
}

/// Signal and noise laws with their integrators, shared by every solver.
#[derive(Debug, Clone)]
pub struct Engine {
    pub signal: SignalDist,
    pub noise: NoiseDist,
    pub cfg: QuadratureConfig,
    sig: SignalIntegrator,
    noi: NoiseIntegrator,
}

impl Engine {
    pub fn new(signal: &SignalDist, noise: &NoiseDist, cfg: &QuadratureConfig) -> Result<Self> {
        signal.validate()?;
        noise.validate()?;
        cfg.validate()?;
        Ok(Self {
            signal: *signal,
            noise: *noise,
            cfg: *cfg,
            sig: SignalIntegrator::new(signal, cfg),
            noi: NoiseIntegrator::new(noise, cfg),
        })
    }

    pub fn signal_m2(&self) -> f64 {
        self.signal.second_moment()
    }

    pub fn sigma2(&self) -> f64 {
        self.noise.variance()
    }

    /// `(E[(prox_g(Theta + s H; t) - Theta)^2], E[(prox_g - Theta) H])` at
    /// `s = beta / nu`, `t = 1 / nu`.
    pub(crate) fn reg_moments(&self, reg: &RegSpec, beta: f64, nu: f64) -> (f64, f64) {
        let (s, t) = (beta / nu, 1.0 / nu);
        let kinks = reg.kinks(t);
        let err = |theta: f64, x: f64| reg.prox(x, t) - theta;
        let err2 = self.sig.expect(s, &kinks, |th, x| err(th, x).powi(2));
        let err_h = self.sig.expect_h(s, &kinks, err);
        (err2, err_h)
    }

    /// `(E[env'(Z + alpha G; kappa)^2], E[env'(Z + alpha G; kappa) G])`.
    pub(crate) fn loss_moments(&self, loss: &LossSpec, alpha: f64, kappa: f64) -> (f64, f64) {
        let kinks = loss.kinks(kappa);
        let env2 = self.noi.expect(alpha, &kinks, |w| loss.env_prime(w, kappa).powi(2));
        let env_g = self.noi.expect_g(alpha, &kinks, |w| loss.env_prime(w, kappa));
        (env2, env_g)
    }

    /// Largest absolute defect of the four equations at `sol`.
    pub fn residual(&self, loss: &LossSpec, reg: &RegSpec, c_delta: f64, sol: &SystemSolution) -> f64 {
        let (err2, err_h) = self.reg_moments(reg, sol.beta, sol.nu);
        let (env2, env_g) = self.loss_moments(loss, sol.alpha, sol.kappa);
        [
            sol.alpha * sol.alpha - err2,
            sol.beta * sol.beta - c_delta * env2,
            sol.kappa * sol.beta - err_h,
            sol.nu * sol.alpha - c_delta * env_g,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `sign` with an explicit zero band for quantities that vanish by symmetry.
pub fn sign_of(v: f64) -> i8 {
    if v.abs() < 1e-13 {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}
