use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::sys1b::{iterate_corr, CorrSolution};
use crate::fixedpoint::{Engine, SystemSolution};
use crate::prox::{Prox, RegSpec};
use crate::randmodel::{NoiseDist, QuadratureConfig, SignalDist};
use crate::roots::{brent, expand_upper};

/// Limit of a vanishing penalty for square loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolator {
    /// Minimum l2-norm interpolator (`lambda -> 0+` of ridge).
    Ridgeless,
    /// Minimum l1-norm interpolator (`lambda -> 0+` of lasso).
    Lassoless,
}

impl Interpolator {
    /// The interpolator a zero-level penalty stands for, judged by the family
    /// it was written in: `Ridge(0)` and `None` are ridgeless, `Lasso(0)` and
    /// `ElasticNet(0, 0)` lassoless.
    pub fn from_reg(reg: &RegSpec) -> Option<Self> {
        match *reg {
            RegSpec::None => Some(Interpolator::Ridgeless),
            RegSpec::Ridge { lambda1 } if lambda1 == 0.0 => Some(Interpolator::Ridgeless),
            RegSpec::Lasso { lambda2 } if lambda2 == 0.0 => Some(Interpolator::Lassoless),
            RegSpec::ElasticNet { lambda1, lambda2 } if lambda1 == 0.0 && lambda2 == 0.0 => Some(Interpolator::Lassoless),
            _ => None,
        }
    }

    fn unit(&self) -> RegSpec {
        match self {
            Interpolator::Ridgeless => RegSpec::ridge(1.0),
            Interpolator::Lassoless => RegSpec::lasso(1.0),
        }
    }
}

/// Square-loss solution in the effective-noise coordinates.
///
/// `tau^2 = sigma^2 + alpha^2` is the effective noise level, `a` the penalty
/// level relative to `beta`, and `xi^2 = sigma^2 + R_inf` the full-ensemble
/// counterpart of `tau^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsqSolution {
    pub tau: f64,
    pub a: f64,
    pub xi: Option<f64>,
    pub eta_h: Option<f64>,
    /// `None` in the interpolator limit, where `nu -> 0`.
    pub nu: Option<f64>,
    /// Argument of the penalty prox, evaluated at `Theta + tau H / sqrt(c delta)`.
    pub prox_t: f64,
    /// Penalty whose prox is evaluated; the unit penalty for interpolators.
    pub reg: RegSpec,
    pub c: f64,
    pub c_delta: f64,
    pub sigma2: f64,
}

impl LsqSolution {
    pub fn alpha2(&self) -> f64 {
        (self.tau * self.tau - self.sigma2).max(0.0)
    }

    pub fn r_inf(&self) -> Option<f64> {
        self.xi.map(|xi| (xi * xi - self.sigma2).max(0.0))
    }

    pub fn eta_g(&self) -> Option<f64> {
        let a2 = self.alpha2();
        self.r_inf().map(|r| if a2 > 0.0 { r / a2 } else { 1.0 })
    }

    fn s(&self) -> f64 {
        self.tau / self.c_delta.sqrt()
    }

    /// Maps back to `(alpha, beta, kappa, nu)`; unavailable for interpolators.
    pub fn to_system(&self, c_delta: f64, sigma2: f64) -> Result<SystemSolution> {
        let nu = self
            .nu
            .ok_or_else(|| Error::Domain("interpolator limit has nu = 0 and no four-variable form".into()))?;
        Ok(SystemSolution {
            alpha: (self.tau * self.tau - sigma2).max(0.0).sqrt(),
            beta: self.tau * nu / c_delta.sqrt(),
            kappa: c_delta / nu - 1.0,
            nu,
            residual: f64::NAN,
        })
    }
}

impl Engine {
    fn lsq_inputs(&self, c_delta: f64, c: f64) -> Result<f64> {
        if !(c_delta > 0.0 && c_delta.is_finite()) {
            return Err(Error::Domain(format!("c*delta must be positive, got {c_delta}")));
        }
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::Domain(format!("subsample ratio must lie in (0, 1], got {c}")));
        }
        let sigma2 = self.sigma2();
        if !sigma2.is_finite() {
            return Err(Error::Domain("square loss needs noise with finite variance".into()));
        }
        if !self.signal_m2().is_finite() {
            return Err(Error::Domain("square-loss reductions need a signal with finite second moment".into()));
        }
        if self.signal.is_zero() && self.noise.is_zero() {
            return Err(Error::PerfectRecovery);
        }
        Ok(sigma2)
    }

    /// `E[(prox(Theta + s H; t) - Theta)^2]`.
    fn prox_mse(&self, reg: &RegSpec, s: f64, t: f64) -> f64 {
        self.sig.expect(s, &reg.kinks(t), |th, x| (reg.prox(x, t) - th).powi(2))
    }

    /// `E[prox'(Theta + s H; t)]`.
    fn prox_slope(&self, reg: &RegSpec, s: f64, t: f64) -> f64 {
        self.sig.expect(s, &reg.kinks(t), |_, x| reg.prox_prime(x, t))
    }

    /// Square loss with a penalty of positive level, in `(tau, a)`.
    pub fn solve_sys2(&self, reg: &RegSpec, c_delta: f64, want_xi: bool, c: f64) -> Result<LsqSolution> {
        let sigma2 = self.lsq_inputs(c_delta, c)?;
        reg.validate()?;
        let reg = reg.canonical();
        if reg == RegSpec::None {
            return Err(Error::Domain("penalty level must be positive; use the interpolator system for the limit".into()));
        }
        let sigma = sigma2.sqrt();

        // For fixed tau, nu solves nu - c delta + E[prox'] = 0, increasing in nu.
        let nu_of = |tau: f64| -> Result<f64> {
            let s = tau / c_delta.sqrt();
            let g = |nu: f64| nu - c_delta + self.prox_slope(&reg, s, 1.0 / nu);
            brent(g, c_delta * 1e-14, c_delta, 1e-15 * c_delta, "system 2 nu")
        };
        let outer = |tau: f64| -> f64 {
            match nu_of(tau) {
                Ok(nu) => sigma2 + self.prox_mse(&reg, tau / c_delta.sqrt(), 1.0 / nu) - tau * tau,
                Err(_) => f64::NAN,
            }
        };
        let tau_lo = sigma.max(1e-10);
        let start = 2.0 * (sigma2 + self.signal_m2()).sqrt().max(tau_lo);
        let tau_hi = expand_upper(&outer, start, -1.0, "system 2 tau bracket")?;
        let tau = brent(&outer, tau_lo, tau_hi, 1e-14 * tau_hi, "system 2 tau")?;
        let nu = nu_of(tau)?;
        let mut sol = LsqSolution {
            tau,
            a: reg.level() * c_delta.sqrt() / (tau * nu),
            xi: None,
            eta_h: None,
            nu: Some(nu),
            prox_t: 1.0 / nu,
            reg,
            c,
            c_delta,
            sigma2,
        };
        if want_xi {
            self.attach_xi(&mut sol)?;
        }
        Ok(sol)
    }

    /// Square loss in the vanishing-penalty limit.
    pub fn solve_sys4(&self, kind: Interpolator, c: f64, delta: f64, want_xi: bool) -> Result<LsqSolution> {
        let c_delta = c * delta;
        let sigma2 = self.lsq_inputs(c_delta, c)?;
        if (c_delta - 1.0).abs() < 1e-12 {
            return Err(Error::InterpolationThreshold { c_delta });
        }
        let mut sol = if c_delta > 1.0 {
            LsqSolution {
                tau: (sigma2 * c_delta / (c_delta - 1.0)).sqrt(),
                a: 0.0,
                xi: None,
                eta_h: None,
                nu: Some(c_delta - 1.0),
                prox_t: 1.0,
                reg: RegSpec::None,
                c,
                c_delta,
                sigma2,
            }
        } else {
            let unit = kind.unit();
            let threshold_of = |tau: f64| -> Result<f64> { self.interp_threshold(&unit, tau / c_delta.sqrt(), c_delta) };
            let outer = |tau: f64| -> f64 {
                match threshold_of(tau) {
                    Ok(t) => sigma2 + self.prox_mse(&unit, tau / c_delta.sqrt(), t) - tau * tau,
                    Err(_) => f64::NAN,
                }
            };
            let tau_lo = (sigma2 / (1.0 - c_delta)).sqrt().max(1e-10);
            let start = 2.0 * ((sigma2 + self.signal_m2()) / (1.0 - c_delta)).sqrt().max(tau_lo);
            let tau_hi = expand_upper(&outer, start, -1.0, "system 4 tau bracket")?;
            let tau = if outer(tau_lo) <= 0.0 { tau_lo } else { brent(&outer, tau_lo, tau_hi, 1e-14 * tau_hi, "system 4 tau")? };
            let t = threshold_of(tau)?;
            LsqSolution {
                tau,
                a: t * c_delta.sqrt() / tau,
                xi: None,
                eta_h: None,
                nu: None,
                prox_t: t,
                reg: unit,
                c,
                c_delta,
                sigma2,
            }
        };
        if want_xi {
            self.attach_xi(&mut sol)?;
        }
        Ok(sol)
    }

    /// Prox argument `t` with `E[prox'(Theta + s H; t)] = c delta` for a unit penalty.
    pub(crate) fn interp_threshold(&self, unit: &RegSpec, s: f64, c_delta: f64) -> Result<f64> {
        if let RegSpec::Ridge { lambda1 } = *unit {
            return Ok((1.0 / c_delta - 1.0) / lambda1);
        }
        let g = |t: f64| self.prox_slope(unit, s, t) - c_delta;
        let hi = expand_upper(g, s.max(1e-8), -1.0, "interpolator threshold bracket")?;
        brent(g, 0.0, hi, 1e-15 * hi, "interpolator threshold")
    }

    fn attach_xi(&self, sol: &mut LsqSolution) -> Result<()> {
        let corr = self.lsq_corr(sol, sol)?;
        sol.eta_h = Some(corr.eta_h);
        sol.xi = Some(sol.tau * (corr.eta_h / sol.c).sqrt());
        Ok(())
    }

    /// Correlation pair of two square-loss estimators.
    ///
    /// With square loss the loss-side map is linear:
    /// `F_loss(eta_G) = sqrt(c c~) (sigma^2 + alpha alpha~ eta_G) / (tau tau~)`.
    pub fn lsq_corr(&self, a: &LsqSolution, b: &LsqSolution) -> Result<CorrSolution> {
        if a.sigma2 != b.sigma2 {
            return Err(Error::Domain("both estimators must see the same noise".into()));
        }
        let identical = a == b;
        let (alpha_a, alpha_b) = (a.alpha2().sqrt(), b.alpha2().sqrt());
        let scale = (a.c * b.c).sqrt() / (a.tau * b.tau);
        let f_loss = |eta_g: f64| -> Result<f64> { Ok(scale * (a.sigma2 + alpha_a * alpha_b * eta_g)) };
        let (sa, sb) = (a.s(), b.s());
        let (ka, kb) = (a.reg.kinks(a.prox_t), b.reg.kinks(b.prox_t));
        let ea = self.prox_mse(&a.reg, sa, a.prox_t);
        let eb = if identical { ea } else { self.prox_mse(&b.reg, sb, b.prox_t) };
        let f_reg = |eta_h: f64| -> Result<f64> {
            let denom = (ea * eb).sqrt();
            if denom == 0.0 {
                return Ok(0.0);
            }
            if let (Some(fa), Some(fb)) = (linear_prox(&a.reg, a.prox_t), linear_prox(&b.reg, b.prox_t)) {
                let cross = (fa - 1.0) * (fb - 1.0) * self.signal_m2() + fa * fb * sa * sb * eta_h;
                return Ok(cross / denom);
            }
            let cross = self.sig.expect_pair(
                sa,
                &ka,
                |th, x| a.reg.prox(x, a.prox_t) - th,
                sb,
                &kb,
                |th, x| b.reg.prox(x, b.prox_t) - th,
                eta_h,
            );
            Ok(cross / denom)
        };
        iterate_corr(f_loss, f_reg, a.c, b.c, identical)
    }
}

/// Slope `f` of a prox that is linear, `prox(x; t) = f x`.
fn linear_prox(reg: &RegSpec, t: f64) -> Option<f64> {
    (reg.l1() == 0.0).then(|| 1.0 / (1.0 + reg.l2() * t))
}

/// Free-standing square-loss entry point.
pub fn solve_sys2(
    reg: &RegSpec,
    c_delta: f64,
    signal: &SignalDist,
    noise: &NoiseDist,
    cfg: &QuadratureConfig,
    want_xi: bool,
    c: f64,
) -> Result<LsqSolution> {
    Engine::new(signal, noise, cfg)?.solve_sys2(reg, c_delta, want_xi, c)
}

/// Free-standing interpolator entry point.
pub fn solve_sys4(
    kind: Interpolator,
    c: f64,
    delta: f64,
    signal: &SignalDist,
    noise: &NoiseDist,
    cfg: &QuadratureConfig,
    want_xi: bool,
) -> Result<LsqSolution> {
    Engine::new(signal, noise, cfg)?.solve_sys4(kind, c, delta, want_xi)
}
