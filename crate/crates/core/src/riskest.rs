//! Data-driven risk estimates: degrees of freedom, residual degrees of
//! freedom, and the corrected-residual estimator for pairs and ensembles.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mestim::{EnsembleFit, FitMethod, FitResult};
use crate::prox::{LossSpec, RegSpec};
use crate::randmodel::Dataset;

/// `tr_v` below this fraction of `|I|` counts as zero.
pub const DEGENERATE_TR_V: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DfFormula {
    SquareRidge,
    SquareLasso,
    SquareElasticNet,
    HuberRidge,
    HuberLasso,
    HuberElasticNet,
}

/// Whether the consistency of the estimate is backed by theory (strongly
/// convex penalties on both sides) or only observed in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guarantee {
    Proved,
    Empirical,
}

impl Guarantee {
    pub fn of(reg: &RegSpec) -> Self {
        if reg.is_strongly_convex() {
            Guarantee::Proved
        } else {
            Guarantee::Empirical
        }
    }

    pub fn and(self, other: Guarantee) -> Guarantee {
        if self == Guarantee::Proved && other == Guarantee::Proved {
            Guarantee::Proved
        } else {
            Guarantee::Empirical
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfReport {
    /// `tr[d(X_I theta_hat)/d y_I]`.
    pub df: f64,
    /// `tr[d loss'(y_I - X_I theta_hat)/d y_I]`.
    pub tr_v: f64,
    pub formula: DfFormula,
}

impl DfReport {
    /// `df / tr_v`, the multiplier on `loss'(r_i)` for in-sample rows.
    pub fn ratio(&self, k: usize) -> Result<f64> {
        if !(self.tr_v >= DEGENERATE_TR_V * k as f64) {
            return Err(Error::DegenerateCorrection { tr_v: self.tr_v, k });
        }
        Ok(self.df / self.tr_v)
    }
}

/// `tr[(A + lambda I)^-1 A]` for `A = X_S^T D X_S`.
fn smoother_trace(x: &DMatrix<f64>, cols: &[usize], weights: &DVector<f64>, lambda: f64) -> Result<f64> {
    if cols.is_empty() {
        return Ok(0.0);
    }
    let xs = x.select_columns(cols);
    let a = xs.tr_mul(&DMatrix::from_diagonal(weights)) * &xs;
    let mut shifted = a.clone();
    for j in 0..cols.len() {
        shifted[(j, j)] += lambda;
    }
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::LinAlg(format!("smoother system on {} columns is singular (lambda = {lambda})", cols.len())))?;
    Ok(chol.solve(&a).trace())
}

/// Closed-form `df` and `tr_v` for square or Huber loss with a ridge,
/// lasso or elastic-net penalty. An unpenalized fit uses the ridge row at
/// zero level.
pub fn compute_df(fit: &FitResult, x_i: &DMatrix<f64>, loss: &LossSpec, reg: &RegSpec) -> Result<DfReport> {
    let (k, p) = x_i.shape();
    if fit.theta_hat.len() != p || fit.residuals.len() != k {
        return Err(Error::Domain(format!("fit of dimension ({}, {}) for a {k}x{p} design", fit.residuals.len(), fit.theta_hat.len())));
    }
    let weights = fit.residuals.map(|r| loss.second(r));
    let all: Vec<usize> = (0..p).collect();
    let huber = matches!(loss, LossSpec::Huber { .. });
    let canon = match (fit.method, reg.canonical()) {
        (FitMethod::L1Homotopy, _) => RegSpec::Lasso { lambda2: 0.0 },
        (_, r) => r,
    };
    let (df, formula) = match canon {
        RegSpec::Lasso { .. } => (fit.active_set.len() as f64, if huber { DfFormula::HuberLasso } else { DfFormula::SquareLasso }),
        RegSpec::ElasticNet { lambda1, .. } => (
            smoother_trace(x_i, &fit.active_set, &weights, lambda1)?,
            if huber { DfFormula::HuberElasticNet } else { DfFormula::SquareElasticNet },
        ),
        RegSpec::None if fit.method == FitMethod::MinNormInterpolator => (k as f64, DfFormula::SquareRidge),
        RegSpec::Ridge { .. } | RegSpec::None => {
            (smoother_trace(x_i, &all, &weights, canon.l2())?, if huber { DfFormula::HuberRidge } else { DfFormula::SquareRidge })
        }
    };
    let tr_v = match *loss {
        LossSpec::Square => k as f64 - df,
        LossSpec::Huber { rho } => (fit.inlier_set.len() as f64 - df) / rho,
    };
    // Rounding in the trace can leave a tiny negative value.
    Ok(DfReport { df: df.max(0.0), tr_v: tr_v.max(0.0), formula })
}

/// One side of a pair estimate.
#[derive(Debug, Clone, Copy)]
pub struct EstSide<'a> {
    pub loss: &'a LossSpec,
    /// Sorted subsample rows.
    pub indices: &'a [usize],
    /// `y - X theta_hat` over all `n` rows.
    pub residuals: &'a DVector<f64>,
    pub df: &'a DfReport,
}

impl EstSide<'_> {
    fn corrected(&self) -> Result<DVector<f64>> {
        let ratio = self.df.ratio(self.indices.len())?;
        let mut out = self.residuals.clone();
        for &i in self.indices {
            out[i] += ratio * self.loss.derivative(self.residuals[i]);
        }
        Ok(out)
    }
}

/// `(1/n) sum_i (r_i + 1{i in I} (df/tr_v) loss'(r_i)) (r~_i + 1{i in I~} (df~/tr_v~) loss~'(r~_i))`.
pub fn est_component(a: &EstSide, b: &EstSide) -> Result<f64> {
    let n = a.residuals.len();
    if b.residuals.len() != n || n == 0 {
        return Err(Error::Domain(format!("residual vectors of length {n} and {}", b.residuals.len())));
    }
    Ok(a.corrected()?.dot(&b.corrected()?) / n as f64)
}

/// `y - X theta` on every row.
pub fn full_residuals(data: &Dataset, theta: &DVector<f64>) -> DVector<f64> {
    &data.y - &data.x * theta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    /// `(1/M^2) sum_{m, l} EST_{m, l}`.
    pub est: f64,
    /// `EST_{m, l}` for every ordered pair.
    pub pairs: Vec<Vec<f64>>,
    pub dfs: Vec<DfReport>,
    pub guarantee: Guarantee,
}

pub fn est_ensemble(ensemble: &EnsembleFit, data: &Dataset) -> Result<EnsembleEstimate> {
    let m = ensemble.members.len();
    if m == 0 {
        return Err(Error::Domain("empty ensemble".into()));
    }
    let mut dfs = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    let mut guarantee = Guarantee::Proved;
    for (spec, set, fit) in &ensemble.members {
        let x_i = data.x.select_rows(&set.indices);
        dfs.push(compute_df(fit, &x_i, &spec.loss, &spec.reg)?);
        residuals.push(full_residuals(data, &fit.theta_hat));
        guarantee = guarantee.and(Guarantee::of(&spec.reg));
    }
    let corrected: Vec<DVector<f64>> = ensemble
        .members
        .iter()
        .zip(&dfs)
        .zip(&residuals)
        .map(|(((spec, set, _), df), r)| EstSide { loss: &spec.loss, indices: &set.indices, residuals: r, df }.corrected())
        .collect::<Result<_>>()?;
    let n = data.n as f64;
    let pairs: Vec<Vec<f64>> = corrected.iter().map(|a| corrected.iter().map(|b| a.dot(b) / n).collect()).collect();
    let est = pairs.iter().flatten().sum::<f64>() / (m * m) as f64;
    Ok(EnsembleEstimate { est, pairs, dfs, guarantee })
}
