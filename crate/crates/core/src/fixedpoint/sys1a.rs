use crate::error::{Error, Result};
use crate::fixedpoint::{Engine, SystemSolution};
use crate::prox::{LossSpec, RegSpec};
use crate::randmodel::{NoiseDist, QuadratureConfig, SignalDist};

/// Tolerance on the four-equation defect of a returned solution.
pub const SYS1A_TOL: f64 = 1e-9;

/// Closed-form solution for square loss with ridge penalty `lambda`.
///
/// `kappa (nu + lambda) = 1` and `nu (1 + kappa) = c delta` give a quadratic in
/// `nu`; the two norms then solve a linear system.
pub fn ridge_square_closed_form(lambda: f64, c_delta: f64, sigma2: f64, m2: f64) -> SystemSolution {
    let b = lambda + 1.0 - c_delta;
    let nu = 0.5 * (-b + (b * b + 4.0 * c_delta * lambda).sqrt());
    let kappa = 1.0 / (nu + lambda);
    let shrink = c_delta / ((1.0 + kappa) * (1.0 + kappa));
    let alpha2 = kappa * kappa * (shrink * sigma2 + lambda * lambda * m2) / (1.0 - kappa * kappa * shrink);
    let beta2 = shrink * (sigma2 + alpha2);
    SystemSolution { alpha: alpha2.sqrt(), beta: beta2.sqrt(), kappa, nu, residual: f64::NAN }
}

impl Engine {
    pub(crate) fn check_sys1a_inputs(&self, loss: &LossSpec, reg: &RegSpec, c_delta: f64) -> Result<()> {
        loss.validate()?;
        reg.validate()?;
        if !(c_delta > 0.0 && c_delta.is_finite()) {
            return Err(Error::Domain(format!("c*delta must be positive, got {c_delta}")));
        }
        if self.signal.is_zero() && self.noise.is_zero() {
            return Err(Error::PerfectRecovery);
        }
        if matches!(loss, LossSpec::Square) && !self.sigma2().is_finite() {
            return Err(Error::Domain("square loss needs noise with finite variance".into()));
        }
        if reg.canonical() == RegSpec::None && c_delta <= 1.0 {
            if c_delta == 1.0 {
                return Err(Error::InterpolationThreshold { c_delta });
            }
            return Err(Error::Domain(format!(
                "unpenalized fit with c*delta = {c_delta} < 1 has no unique solution; use the interpolator system"
            )));
        }
        Ok(())
    }

    /// Solves the four-variable system, routing square loss through the
    /// two-variable least-squares system and ridge penalties through the
    /// ridge reduction.
    pub fn solve_sys1a(&self, loss: &LossSpec, reg: &RegSpec, c_delta: f64) -> Result<SystemSolution> {
        self.check_sys1a_inputs(loss, reg, c_delta)?;
        let reg_c = reg.canonical();
        match (loss, reg_c) {
            (LossSpec::Square, RegSpec::None) => {
                let sol = ridge_square_closed_form(0.0, c_delta, self.sigma2(), self.signal_m2());
                Ok(self.finish(loss, reg, c_delta, sol))
            }
            (LossSpec::Square, _) => {
                let lsq = self.solve_sys2(reg, c_delta, false, 1.0)?;
                let sol = lsq.to_system(c_delta, self.sigma2())?;
                Ok(self.finish(loss, reg, c_delta, sol))
            }
            (_, RegSpec::Ridge { lambda1 }) => self.solve_sys3(loss, lambda1, c_delta),
            _ => self.solve_sys1a_generic(loss, reg, c_delta),
        }
    }

    pub(crate) fn finish(&self, loss: &LossSpec, reg: &RegSpec, c_delta: f64, mut sol: SystemSolution) -> SystemSolution {
        sol.residual = self.residual(loss, reg, c_delta, &sol);
        sol
    }

    /// One sweep of the equations: loss side at `(alpha, kappa)` gives
    /// `(beta, nu)`, penalty side at `(beta, nu)` gives the next `(alpha, kappa)`.
    fn sweep_1a(&self, loss: &LossSpec, reg: &RegSpec, c_delta: f64, alpha: f64, kappa: f64) -> Result<[f64; 4]> {
        let (env2, env_g) = self.loss_moments(loss, alpha, kappa);
        let beta = (c_delta * env2).sqrt();
        let nu = c_delta * env_g / alpha;
        if !(beta > 0.0 && nu > 0.0 && beta.is_finite() && nu.is_finite()) {
            return Err(Error::Numeric(format!("loss side degenerate at alpha = {alpha}, kappa = {kappa}")));
        }
        let (err2, err_h) = self.reg_moments(reg, beta, nu);
        let alpha_next = err2.sqrt();
        let kappa_next = err_h / beta;
        if !(alpha_next > 0.0 && kappa_next > 0.0 && alpha_next.is_finite() && kappa_next.is_finite()) {
            return Err(Error::Numeric(format!("penalty side degenerate at beta = {beta}, nu = {nu}")));
        }
        Ok([alpha_next, kappa_next, beta, nu])
    }

    /// Damped fixed-point iteration on the equations followed by a Newton
    /// polish in log coordinates.
    pub fn solve_sys1a_generic(&self, loss: &LossSpec, reg: &RegSpec, c_delta: f64) -> Result<SystemSolution> {
        self.check_sys1a_inputs(loss, reg, c_delta)?;
        let sigma2 = if self.sigma2().is_finite() {
            self.sigma2()
        } else if let NoiseDist::StudentT { scale, .. } = self.noise {
            scale * scale
        } else {
            1.0
        };
        let lam = reg.l2() + reg.l1();
        let init = ridge_square_closed_form(if lam > 0.0 { lam } else { 0.0 }, c_delta, sigma2, self.signal_m2().max(1e-6));
        let (mut alpha, mut kappa) = (init.alpha, init.kappa);
        if !(alpha > 0.0 && kappa > 0.0 && alpha.is_finite() && kappa.is_finite()) {
            alpha = 1.0;
            kappa = 1.0;
        }

        let defect = |x: &[f64; 4], a: f64, k: f64| ((x[0] / a).ln().abs()).max((x[1] / k).ln().abs());
        let mut image = self.sweep_1a(loss, reg, c_delta, alpha, kappa)?;
        let mut gap = defect(&image, alpha, kappa);
        let mut omega = 1.0;
        let mut iterations = 0;
        while gap > 1e-7 && iterations < 400 {
            iterations += 1;
            let cand_a = alpha + omega * (image[0] - alpha);
            let cand_k = kappa + omega * (image[1] - kappa);
            match self.sweep_1a(loss, reg, c_delta, cand_a, cand_k) {
                Ok(cand_img) => {
                    let cand_gap = defect(&cand_img, cand_a, cand_k);
                    if cand_gap <= gap || omega < 1e-3 {
                        alpha = cand_a;
                        kappa = cand_k;
                        image = cand_img;
                        gap = cand_gap;
                        omega = (omega * 1.5).min(1.0);
                    } else {
                        omega *= 0.5;
                    }
                }
                Err(_) => omega *= 0.5,
            }
        }

        // Newton in (ln alpha, ln kappa) on F(u) = ln T(u) - u.
        let eval = |u: [f64; 2]| -> Result<([f64; 2], [f64; 4])> {
            let img = self.sweep_1a(loss, reg, c_delta, u[0].exp(), u[1].exp())?;
            Ok(([img[0].ln() - u[0], img[1].ln() - u[1]], img))
        };
        let norm = |f: &[f64; 2]| f[0].abs().max(f[1].abs());
        let mut u = [alpha.ln(), kappa.ln()];
        let (mut fu, mut img) = eval(u)?;
        for _ in 0..60 {
            if norm(&fu) < 1e-14 {
                break;
            }
            let h = 1e-7;
            let mut jac = [[0.0; 2]; 2];
            for j in 0..2 {
                let mut up = u;
                up[j] += h;
                let mut dn = u;
                dn[j] -= h;
                let (fp, _) = eval(up)?;
                let (fm, _) = eval(dn)?;
                for i in 0..2 {
                    jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-300 {
                break;
            }
            let step = [
                -(jac[1][1] * fu[0] - jac[0][1] * fu[1]) / det,
                -(-jac[1][0] * fu[0] + jac[0][0] * fu[1]) / det,
            ];
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let cand = [u[0] + t * step[0], u[1] + t * step[1]];
                if let Ok((fc, ic)) = eval(cand) {
                    if norm(&fc) < norm(&fu) {
                        u = cand;
                        fu = fc;
                        img = ic;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }

        let (alpha, kappa) = (u[0].exp(), u[1].exp());
        let (env2, env_g) = self.loss_moments(loss, alpha, kappa);
        let sol = SystemSolution {
            alpha,
            beta: (c_delta * env2).sqrt(),
            kappa,
            nu: c_delta * env_g / alpha,
            residual: f64::NAN,
        };
        let _ = img;
        let sol = self.finish(loss, reg, c_delta, sol);
        if sol.residual <= SYS1A_TOL {
            Ok(sol)
        } else {
            Err(Error::NoConvergence {
                what: "system 1a",
                iterations,
                residual: sol.residual,
                last: vec![sol.alpha, sol.beta, sol.kappa, sol.nu],
            })
        }
    }
}

/// Free-standing entry point that builds an [`Engine`] for one solve.
pub fn solve_sys1a(
    loss: &LossSpec,
    reg: &RegSpec,
    c_delta: f64,
    signal: &SignalDist,
    noise: &NoiseDist,
    cfg: &QuadratureConfig,
) -> Result<SystemSolution> {
    Engine::new(signal, noise, cfg)?.solve_sys1a(loss, reg, c_delta)
}
