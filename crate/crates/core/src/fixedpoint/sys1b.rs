use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{sign_of, Engine, SystemSolution};
use crate::prox::{LossSpec, Prox, RegSpec};
use crate::roots::brent;

pub const SYS1B_TOL: f64 = 1e-10;
pub const SYS1B_MAX_ITER: usize = 200;

/// Limiting correlations of the residual-side (`eta_g`) and coefficient-side
/// (`eta_h`) Gaussians of two estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrSolution {
    pub eta_g: f64,
    pub eta_h: f64,
    pub iterations: usize,
    /// Iterates of `eta_h`, starting from 0.
    pub trace: Vec<f64>,
    /// `|eta_h - F_loss(eta_g)|` at the returned pair.
    pub defect: f64,
}

/// One side of a correlation computation.
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub loss: &'a LossSpec,
    pub reg: &'a RegSpec,
    pub c: f64,
    pub sol: &'a SystemSolution,
}

impl Member<'_> {
    fn same_as(&self, other: &Member<'_>) -> bool {
        self.loss == other.loss && self.reg == other.reg && self.c == other.c && self.sol == other.sol
    }
}

/// Iterates `eta_h <- F_loss(F_reg(eta_h))` from 0 and returns the fixed point
/// with `eta_g = F_reg(eta_h)`.
pub(crate) fn iterate_corr(
    f_loss: impl Fn(f64) -> Result<f64>,
    f_reg: impl Fn(f64) -> Result<f64>,
    c: f64,
    c_tilde: f64,
    identical: bool,
) -> Result<CorrSolution> {
    if c.min(c_tilde) >= 1.0 {
        if identical {
            return Ok(CorrSolution { eta_g: 1.0, eta_h: 1.0, iterations: 0, trace: vec![1.0], defect: 0.0 });
        }
        return Err(Error::ContractionUnavailable { c, c_tilde });
    }
    let bound = (c * c_tilde).sqrt();
    let map = |eta_h: f64| -> Result<f64> { f_loss(f_reg(eta_h)?.clamp(-1.0, 1.0)) };
    let mut eta_h = 0.0;
    let mut trace = vec![eta_h];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < SYS1B_MAX_ITER {
        iterations += 1;
        let next = map(eta_h)?;
        trace.push(next);
        let step = (next - eta_h).abs();
        eta_h = next;
        if step < SYS1B_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        let mut failure = None;
        let root = brent(
            |e| match map(e) {
                Ok(v) => e - v,
                Err(err) => {
                    failure = Some(err);
                    f64::NAN
                }
            },
            -bound,
            bound,
            1e-14,
            "system 1b",
        );
        if let Some(err) = failure {
            return Err(err);
        }
        eta_h = root?;
    } else if let [.., x0, x1, x2] = trace[..] {
        // Aitken extrapolation removes the geometric tail left by the step test.
        let denom = x2 - 2.0 * x1 + x0;
        if denom != 0.0 {
            let cand = x2 - (x2 - x1).powi(2) / denom;
            if cand.abs() <= bound && (map(cand)? - cand).abs() < (x2 - x1).abs() {
                eta_h = cand;
            }
        }
    }
    let eta_g = f_reg(eta_h)?.clamp(-1.0, 1.0);
    let defect = (eta_h - f_loss(eta_g)?).abs();
    Ok(CorrSolution { eta_g, eta_h, iterations, trace, defect })
}

impl Engine {
    /// `F_loss(eta_g) = sqrt(c c~) E[e e~] / sqrt(E[e^2] E[e~^2])` with
    /// `e = env'(Z + alpha G; kappa)` and `corr(G, G~) = eta_g`.
    pub fn eval_f_loss(&self, eta_g: f64, a: &Member<'_>, b: &Member<'_>) -> f64 {
        let (ea2, _) = self.loss_moments(a.loss, a.sol.alpha, a.sol.kappa);
        let (eb2, _) = self.loss_moments(b.loss, b.sol.alpha, b.sol.kappa);
        self.f_loss_with(eta_g, a, b, (ea2 * eb2).sqrt())
    }

    fn f_loss_with(&self, eta_g: f64, a: &Member<'_>, b: &Member<'_>, denom: f64) -> f64 {
        if denom == 0.0 {
            return 0.0;
        }
        let (ka, kb) = (a.sol.kappa, b.sol.kappa);
        let cross = self.noi.expect_pair(
            a.sol.alpha,
            &a.loss.kinks(ka),
            |w| a.loss.env_prime(w, ka),
            b.sol.alpha,
            &b.loss.kinks(kb),
            |w| b.loss.env_prime(w, kb),
            eta_g,
        );
        (a.c * b.c).sqrt() * cross / denom
    }

    /// `F_reg(eta_h) = E[f f~] / sqrt(E[f^2] E[f~^2])` with
    /// `f = prox(Theta + (beta/nu) H; 1/nu) - Theta` and `corr(H, H~) = eta_h`.
    pub fn eval_f_reg(&self, eta_h: f64, a: &Member<'_>, b: &Member<'_>) -> f64 {
        let (fa2, _) = self.reg_moments(a.reg, a.sol.beta, a.sol.nu);
        let (fb2, _) = self.reg_moments(b.reg, b.sol.beta, b.sol.nu);
        self.f_reg_with(eta_h, a, b, (fa2 * fb2).sqrt())
    }

    fn f_reg_with(&self, eta_h: f64, a: &Member<'_>, b: &Member<'_>, denom: f64) -> f64 {
        if denom == 0.0 {
            return 0.0;
        }
        let (ta, tb) = (1.0 / a.sol.nu, 1.0 / b.sol.nu);
        let cross = self.sig.expect_pair(
            a.sol.beta * ta,
            &a.reg.kinks(ta),
            |th, x| a.reg.prox(x, ta) - th,
            b.sol.beta * tb,
            &b.reg.kinks(tb),
            |th, x| b.reg.prox(x, tb) - th,
            eta_h,
        );
        cross / denom
    }

    /// Correlation pair of two estimators fitted on overlapping subsamples.
    pub fn solve_sys1b(&self, a: &Member<'_>, b: &Member<'_>) -> Result<CorrSolution> {
        for m in [a, b] {
            if !(m.c > 0.0 && m.c <= 1.0) {
                return Err(Error::Domain(format!("subsample ratio must lie in (0, 1], got {}", m.c)));
            }
        }
        let (ea2, _) = self.loss_moments(a.loss, a.sol.alpha, a.sol.kappa);
        let (eb2, _) = self.loss_moments(b.loss, b.sol.alpha, b.sol.kappa);
        let (fa2, _) = self.reg_moments(a.reg, a.sol.beta, a.sol.nu);
        let (fb2, _) = self.reg_moments(b.reg, b.sol.beta, b.sol.nu);
        let (dl, dr) = ((ea2 * eb2).sqrt(), (fa2 * fb2).sqrt());
        iterate_corr(
            |eg| Ok(self.f_loss_with(eg, a, b, dl)),
            |eh| Ok(self.f_reg_with(eh, a, b, dr)),
            a.c,
            b.c,
            a.same_as(b),
        )
    }

    /// Signs of `F_reg(F_loss(0))` and `F_loss(F_reg(0))`, which are the signs
    /// of `eta_g` and `eta_h` at the solution.
    pub fn sign_pattern(&self, a: &Member<'_>, b: &Member<'_>) -> (i8, i8) {
        let g = self.eval_f_reg(self.eval_f_loss(0.0, a, b), a, b);
        let h = self.eval_f_loss(self.eval_f_reg(0.0, a, b), a, b);
        (sign_of(g), sign_of(h))
    }
}
