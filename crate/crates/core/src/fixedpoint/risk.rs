use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::lsq::Interpolator;
use crate::fixedpoint::sys1b::Member;
use crate::fixedpoint::{Component, Engine, EnsembleConfig, EnsembleSize, SystemSolution};
use crate::prox::{LossSpec, RegSpec};

/// `R_M = R_1 / M + (1 - 1/M) R_inf`.
pub fn homogeneous_risk(r1: f64, r_inf: f64, size: EnsembleSize) -> f64 {
    let inv = size.inverse();
    inv * r1 + (1.0 - inv) * r_inf
}

/// Pairwise `eta_g` between ensemble members; the diagonal is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrMatrix {
    size: usize,
    entries: Vec<Option<f64>>,
}

impl CorrMatrix {
    pub fn new(size: usize) -> Self {
        Self { size, entries: vec![None; size * size] }
    }

    pub fn set(&mut self, i: usize, j: usize, eta_g: f64) {
        self.entries[i * self.size + j] = Some(eta_g);
        self.entries[j * self.size + i] = Some(eta_g);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            Some(1.0)
        } else {
            self.entries[i * self.size + j]
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// Asymptotic risk of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// Average single-member risk.
    pub r1: f64,
    pub r_m: f64,
}

/// Squared error of the averaged estimator,
/// `(1/M^2) [sum_m alpha_m^2 + sum_{m != l} eta_g^{ml} alpha_m alpha_l]`.
///
/// A single listed component is replicated `cfg.size` times and `corr` must
/// then hold its self-overlap correlation at `(0, 1)`.
pub fn ensemble_risk(cfg: &EnsembleConfig, alphas: &[f64], corr: &CorrMatrix) -> Result<RiskReport> {
    if alphas.len() != cfg.components.len() {
        return Err(Error::Domain(format!("{} components but {} error norms", cfg.components.len(), alphas.len())));
    }
    if cfg.components.len() == 1 {
        let r1 = alphas[0] * alphas[0];
        if cfg.size == EnsembleSize::Finite(1) {
            return Ok(RiskReport { r1, r_m: r1 });
        }
        let eta = corr.get(0, 1).ok_or_else(|| Error::Dependency("missing self-overlap correlation".into()))?;
        return Ok(RiskReport { r1, r_m: homogeneous_risk(r1, eta * r1, cfg.size) });
    }
    let m = alphas.len();
    match cfg.size {
        EnsembleSize::Finite(k) if k == m => {}
        other => return Err(Error::Domain(format!("ensemble size {other} does not match {m} listed components"))),
    }
    if corr.size() != m {
        return Err(Error::Domain(format!("correlation matrix is {0}x{0} for {m} components", corr.size())));
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let eta = corr.get(i, j).ok_or_else(|| Error::Dependency(format!("missing correlation for pair ({i}, {j})")))?;
            total += eta * alphas[i] * alphas[j];
        }
    }
    let r1 = alphas.iter().map(|a| a * a).sum::<f64>() / m as f64;
    Ok(RiskReport { r1, r_m: total / (m * m) as f64 })
}

/// Theory for one homogeneous cell `(loss, penalty, c, delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTheory {
    pub r1: f64,
    pub r_inf: f64,
    pub eta_g: f64,
    pub eta_h: f64,
    pub tau: Option<f64>,
    pub a: Option<f64>,
    pub xi: Option<f64>,
    pub system: Option<SystemSolution>,
}

impl CellTheory {
    pub fn alpha2(&self) -> f64 {
        self.r1
    }

    pub fn risk(&self, size: EnsembleSize) -> f64 {
        homogeneous_risk(self.r1, self.r_inf, size)
    }
}

impl Engine {
    /// Solves whichever system fits the component and returns single-member
    /// and full-ensemble risks.
    pub fn cell_theory(&self, component: &Component, delta: f64) -> Result<CellTheory> {
        let Component { loss, reg, c } = *component;
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::Domain(format!("subsample ratio must lie in (0, 1], got {c}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        reg.validate()?;
        loss.validate()?;
        let c_delta = c * delta;
        if loss == LossSpec::Square {
            let lsq = match Interpolator::from_reg(&reg) {
                Some(kind) => self.solve_sys4(kind, c, delta, true)?,
                None => self.solve_sys2(&reg, c_delta, true, c)?,
            };
            let system = match lsq.to_system(c_delta, lsq.sigma2) {
                Ok(s) => Some(self.finish(&loss, &reg.canonical(), c_delta, s)),
                Err(_) => None,
            };
            return Ok(CellTheory {
                r1: lsq.alpha2(),
                r_inf: lsq.r_inf().unwrap_or(f64::NAN),
                eta_g: lsq.eta_g().unwrap_or(f64::NAN),
                eta_h: lsq.eta_h.unwrap_or(f64::NAN),
                tau: Some(lsq.tau),
                a: Some(lsq.a),
                xi: lsq.xi,
                system,
            });
        }
        let reg_c: RegSpec = reg.canonical();
        let sol = self.solve_sys1a(&loss, &reg_c, c_delta)?;
        let me = Member { loss: &loss, reg: &reg_c, c, sol: &sol };
        let corr = self.solve_sys1b(&me, &me)?;
        let r1 = sol.alpha * sol.alpha;
        Ok(CellTheory {
            r1,
            r_inf: corr.eta_g * r1,
            eta_g: corr.eta_g,
            eta_h: corr.eta_h,
            tau: None,
            a: None,
            xi: None,
            system: Some(sol),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randmodel::{NoiseDist, QuadratureConfig, SignalDist};

    #[test]
    fn convex_combination_arithmetic() {
        assert!((homogeneous_risk(1.5, 0.4 * 1.5, EnsembleSize::Finite(2)) - 1.05).abs() < 1e-15);
        assert_eq!(homogeneous_risk(1.5, 0.6, EnsembleSize::Finite(1)), 1.5);
        assert_eq!(homogeneous_risk(1.5, 0.6, EnsembleSize::Infinite), 0.6);
    }

    #[test]
    fn heterogeneous_formula() {
        let comp = Component { loss: LossSpec::Square, reg: RegSpec::ridge(1.0), c: 0.5 };
        let cfg = EnsembleConfig { delta: 2.0, components: vec![comp; 3], size: EnsembleSize::Finite(3) };
        let mut corr = CorrMatrix::new(3);
        corr.set(0, 1, 0.5);
        corr.set(0, 2, 0.25);
        assert!(matches!(ensemble_risk(&cfg, &[1.0, 2.0, 3.0], &corr), Err(Error::Dependency(_))));
        corr.set(1, 2, 0.0);
        let r = ensemble_risk(&cfg, &[1.0, 2.0, 3.0], &corr).unwrap();
        let want = (1.0 + 4.0 + 9.0 + 2.0 * (0.5 * 2.0 + 0.25 * 3.0)) / 9.0;
        assert!((r.r_m - want).abs() < 1e-15);
        assert!((r.r1 - 14.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_member_is_r1() {
        let comp = Component { loss: LossSpec::Square, reg: RegSpec::ridge(1.0), c: 0.5 };
        let cfg = EnsembleConfig::homogeneous(2.0, comp, EnsembleSize::Finite(1));
        let r = ensemble_risk(&cfg, &[1.2], &CorrMatrix::new(1)).unwrap();
        assert_eq!(r.r_m, 1.2 * 1.2);
    }

    #[test]
    fn square_and_generic_cells_agree() {
        let e = Engine::new(
            &SignalDist::TwoPointSparse { strength: 1.0, support: 0.5 },
            &NoiseDist::Gaussian { sigma: 1.0 },
            &QuadratureConfig::default(),
        )
        .unwrap();
        let comp = Component { loss: LossSpec::Square, reg: RegSpec::lasso(0.5), c: 0.5 };
        let lsq = e.cell_theory(&comp, 3.0).unwrap();
        let sol = e.solve_sys1a_generic(&comp.loss, &comp.reg, 1.5).unwrap();
        let me = Member { loss: &comp.loss, reg: &comp.reg, c: 0.5, sol: &sol };
        let corr = e.solve_sys1b(&me, &me).unwrap();
        assert!((lsq.r1 - sol.alpha * sol.alpha).abs() < 1e-7);
        assert!((lsq.eta_g - corr.eta_g).abs() < 1e-7);
        assert!((lsq.eta_h - corr.eta_h).abs() < 1e-7);
    }
}
