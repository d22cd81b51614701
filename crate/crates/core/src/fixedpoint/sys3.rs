use crate::error::{Error, Result};
use crate::fixedpoint::sys1a::SYS1A_TOL;
use crate::fixedpoint::{Engine, SystemSolution};
use crate::prox::{LossSpec, RegSpec};
use crate::randmodel::{NoiseDist, QuadratureConfig, SignalDist};
use crate::roots::{brent, expand_upper};

impl Engine {
    /// For fixed `alpha`, `kappa` in `(0, 1/lambda)` solves
    /// `1 - lambda kappa - c delta kappa E[env' G] / alpha = 0`.
    fn sys3_kappa(&self, loss: &LossSpec, lambda: f64, c_delta: f64, alpha: f64) -> Result<f64> {
        let h = |kappa: f64| {
            let (_, env_g) = self.loss_moments(loss, alpha, kappa);
            1.0 - lambda * kappa - c_delta * kappa * env_g / alpha
        };
        let hi = 1.0 / lambda;
        brent(h, hi * 1e-14, hi, 1e-15 * hi, "system 3 kappa")
    }

    /// Ridge penalty with a general loss, reduced to `(alpha, kappa)`.
    pub fn solve_sys3(&self, loss: &LossSpec, lambda: f64, c_delta: f64) -> Result<SystemSolution> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("ridge level must be positive, got {lambda}")));
        }
        let reg = RegSpec::ridge(lambda);
        self.check_sys1a_inputs(loss, &reg, c_delta)?;
        let m2 = self.signal_m2();
        if !m2.is_finite() {
            return Err(Error::Domain("ridge reduction needs a signal with finite second moment".into()));
        }
        let phi = |alpha: f64| -> f64 {
            match self.sys3_kappa(loss, lambda, c_delta, alpha) {
                Ok(kappa) => {
                    let (env2, _) = self.loss_moments(loss, alpha, kappa);
                    kappa * kappa * (c_delta * env2 + lambda * lambda * m2) - alpha * alpha
                }
                Err(_) => f64::NAN,
            }
        };
        let scale = (m2 + if self.sigma2().is_finite() { self.sigma2() } else { 1.0 }).sqrt();
        let lo = 1e-8 * scale;
        let hi = expand_upper(phi, scale, -1.0, "system 3 alpha bracket")?;
        let alpha = brent(phi, lo, hi, 1e-15 * hi, "system 3 alpha")?;
        let kappa = self.sys3_kappa(loss, lambda, c_delta, alpha)?;
        let beta2 = alpha * alpha / (kappa * kappa) - lambda * lambda * m2;
        if !(beta2 > 0.0) {
            return Err(Error::Numeric(format!(
                "system 3: beta^2 = {beta2:e} at alpha = {alpha}, kappa = {kappa}, lambda = {lambda}"
            )));
        }
        let sol = self.finish(
            loss,
            &reg,
            c_delta,
            SystemSolution { alpha, beta: beta2.sqrt(), kappa, nu: 1.0 / kappa - lambda, residual: f64::NAN },
        );
        if sol.residual <= SYS1A_TOL * (1.0 + alpha * alpha) {
            Ok(sol)
        } else {
            Err(Error::NoConvergence {
                what: "system 3",
                iterations: 0,
                residual: sol.residual,
                last: vec![sol.alpha, sol.beta, sol.kappa, sol.nu],
            })
        }
    }
}

/// Free-standing ridge-reduction entry point.
pub fn solve_sys3(
    loss: &LossSpec,
    lambda: f64,
    c_delta: f64,
    signal: &SignalDist,
    noise: &NoiseDist,
    cfg: &QuadratureConfig,
) -> Result<SystemSolution> {
    Engine::new(signal, noise, cfg)?.solve_sys3(loss, lambda, c_delta)
}
