//! Empirical side: subsample draws, penalized M-estimator fits, ensemble
//! averaging and the realized risk `||theta~ - theta||^2 / p`.

mod solvers;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::Interpolator;
use crate::prox::{LossSpec, RegSpec};
use crate::randmodel::Dataset;
use crate::seed::{derive_seed, rng};

use solvers::{kkt_from_score, mfista, min_norm, objective, ridge_direct, GramCd};

/// Sorted row indices of one subsample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleSet {
    pub indices: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

/// Draws one uniform subset of size `sizes[m]` per member, each from its own
/// stream derived from `seed` and `m`.
pub fn draw_subsamples(n: usize, sizes: &[usize], seed: u64) -> Result<Vec<SubsampleSet>> {
    sizes
        .iter()
        .enumerate()
        .map(|(m, &k)| {
            if k == 0 || k > n {
                return Err(Error::Domain(format!("subsample size {k} must lie in [1, {n}]")));
            }
            let member_seed = derive_seed(seed, &[m as u64]);
            let mut indices = if k == n { (0..n).collect() } else { sample(&mut rng(member_seed), n, k).into_vec() };
            indices.sort_unstable();
            Ok(SubsampleSet { indices, k, seed: member_seed })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Closed forms for ridge, coordinate descent for square loss with an l1
    /// part, accelerated proximal gradient otherwise.
    #[default]
    Auto,
    ProximalGradient,
    CoordinateDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub solver: Solver,
    /// Allow a zero-level penalty on a wide design, returning the
    /// minimum-norm interpolator of the penalty family.
    pub interpolate: bool,
    pub record_objective: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200_000, solver: Solver::Auto, interpolate: false, record_objective: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Cholesky,
    MinNormInterpolator,
    L1Homotopy,
    CoordinateDescent,
    ProximalGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: DVector<f64>,
    /// `y_I - X_I theta_hat`.
    pub residuals: DVector<f64>,
    /// Coordinates with `theta_hat_j != 0`.
    pub active_set: Vec<usize>,
    /// Positions (within the subsample) with `loss''(r_i) > 0`.
    pub inlier_set: Vec<usize>,
    /// Stationarity defect; for interpolators, `max |r_i| / max(1, max |y_i|)`.
    pub kkt_residual: f64,
    /// `loss'(residuals)`.
    pub loss_grad_vec: DVector<f64>,
    pub iterations: usize,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub method: FitMethod,
}

/// Pathwise warm starts kick in once the level is this small relative to
/// `||X^T y||_inf`.
const PATH_RATIO: f64 = 1e-3;
const HOMOTOPY_FLOOR: f64 = 1e-8;

/// Minimizes `sum_i loss(y_i - x_i^T theta) + sum_j g(theta_j)`.
pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, loss: &LossSpec, reg: &RegSpec, opts: &FitOptions) -> Result<FitResult> {
    loss.validate()?;
    reg.validate()?;
    let (k, p) = x.shape();
    if y.len() != k {
        return Err(Error::Domain(format!("design has {k} rows but response has {}", y.len())));
    }
    if k == 0 || p == 0 {
        return Err(Error::Domain("empty design".into()));
    }
    let canon = reg.canonical();
    let mut trace = Vec::new();
    let (theta, iterations, method) = match (Interpolator::from_reg(reg), canon) {
        (Some(kind), _) if k < p => {
            if !opts.interpolate {
                return Err(Error::Domain(format!(
                    "unpenalized fit with k = {k} < p = {p} is not unique; request interpolation"
                )));
            }
            match kind {
                Interpolator::Ridgeless => (min_norm(x, y)?, 0, FitMethod::MinNormInterpolator),
                Interpolator::Lassoless => {
                    let (theta, sweeps) = lasso_homotopy(x, y, opts)?;
                    (theta, sweeps, FitMethod::L1Homotopy)
                }
            }
        }
        (_, RegSpec::None | RegSpec::Ridge { .. }) if *loss == LossSpec::Square && opts.solver != Solver::ProximalGradient => {
            (ridge_direct(x, y, canon.l2())?, 0, FitMethod::Cholesky)
        }
        (_, RegSpec::Lasso { .. } | RegSpec::ElasticNet { .. })
            if *loss == LossSpec::Square && opts.solver != Solver::ProximalGradient =>
        {
            let (theta, sweeps) = square_cd(x, y, &canon, opts)?;
            (theta, sweeps, FitMethod::CoordinateDescent)
        }
        _ => {
            if opts.solver == Solver::CoordinateDescent {
                return Err(Error::NotImplemented("coordinate descent covers square loss only".into()));
            }
            let out = mfista(loss, &canon, x, y, DVector::zeros(p), opts.tol, opts.max_iter, opts.record_objective)?;
            trace = out.trace;
            (out.theta, out.iterations, FitMethod::ProximalGradient)
        }
    };
    Ok(finish(x, y, loss, &canon, theta, iterations, method, trace))
}

fn square_cd(x: &DMatrix<f64>, y: &DVector<f64>, reg: &RegSpec, opts: &FitOptions) -> Result<(DVector<f64>, usize)> {
    let gram = x.tr_mul(x);
    let b = x.tr_mul(y);
    let cd = GramCd { gram: &gram, b: &b, rows: x.nrows() };
    let mut theta = DVector::zeros(x.ncols());
    let lam_max = b.amax();
    let target = reg.l1();
    let mut sweeps = 0;
    if x.nrows() < x.ncols() && cd.lars(reg, &mut theta).is_some() {
        let sweeps = cd.solve(reg, &mut theta, opts.tol, opts.max_iter)?;
        return Ok((theta, sweeps));
    }
    theta.fill(0.0);
    if target < PATH_RATIO * lam_max {
        let mut level = lam_max;
        while level > target {
            sweeps += cd.solve(&reg.with_level(level), &mut theta, opts.tol.max(1e-6 * level), opts.max_iter)?;
            level *= 0.5;
        }
    }
    sweeps += cd.solve(reg, &mut theta, opts.tol, opts.max_iter)?;
    Ok((theta, sweeps))
}

/// Lasso path `lambda_t = lambda_0 2^-t` with warm starts down to
/// `1e-8 lambda_0`, `lambda_0 = ||X^T y||_inf`.
fn lasso_homotopy(x: &DMatrix<f64>, y: &DVector<f64>, opts: &FitOptions) -> Result<(DVector<f64>, usize)> {
    let gram = x.tr_mul(x);
    let b = x.tr_mul(y);
    let cd = GramCd { gram: &gram, b: &b, rows: x.nrows() };
    let lam0 = b.amax();
    let mut theta = DVector::zeros(x.ncols());
    if lam0 == 0.0 {
        return Ok((theta, 0));
    }
    let floor = HOMOTOPY_FLOOR * lam0;
    let floor_tol = opts.tol * lam0.max(1.0) * 1e-2;
    if cd.lars(&RegSpec::lasso(floor), &mut theta).is_some() {
        let sweeps = cd.solve(&RegSpec::lasso(floor), &mut theta, floor_tol, opts.max_iter)?;
        return Ok((theta, sweeps));
    }
    theta.fill(0.0);
    let mut level = lam0;
    let mut sweeps = 0;
    loop {
        level = (0.5 * level).max(floor);
        let tol = if level == floor { floor_tol } else { 1e-3 * level };
        sweeps += cd.solve(&RegSpec::lasso(level), &mut theta, tol, opts.max_iter)?;
        if level == floor {
            return Ok((theta, sweeps));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    loss: &LossSpec,
    reg: &RegSpec,
    theta: DVector<f64>,
    iterations: usize,
    method: FitMethod,
    objective_trace: Vec<f64>,
) -> FitResult {
    let residuals = y - x * &theta;
    let psi = residuals.map(|r| loss.derivative(r));
    let kkt_residual = match method {
        FitMethod::MinNormInterpolator | FitMethod::L1Homotopy => residuals.amax() / y.amax().max(1.0),
        _ => kkt_from_score(reg, &theta, &x.tr_mul(&psi)),
    };
    FitResult {
        active_set: (0..theta.len()).filter(|&j| theta[j] != 0.0).collect(),
        inlier_set: (0..residuals.len()).filter(|&i| loss.second(residuals[i]) > 0.0).collect(),
        objective: objective(loss, reg, x, y, &theta),
        theta_hat: theta,
        residuals,
        kkt_residual,
        loss_grad_vec: psi,
        iterations,
        objective_trace,
        method,
    }
}

/// Rows `indices` of `(X, y)`.
pub fn restrict(x: &DMatrix<f64>, y: &DVector<f64>, indices: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    (x.select_rows(indices), y.select_rows(indices))
}

/// One ensemble member: loss, penalty and integer subsample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub loss: LossSpec,
    pub reg: RegSpec,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleFit {
    pub members: Vec<(MemberSpec, SubsampleSet, FitResult)>,
    pub theta_tilde: DVector<f64>,
}

/// Draws the subsamples and fits every member; failures are collected into
/// [`Error::ComponentFailures`].
pub fn ensemble_fit(data: &Dataset, specs: &[MemberSpec], seed: u64, opts: &FitOptions) -> Result<EnsembleFit> {
    let sizes: Vec<usize> = specs.iter().map(|s| s.k).collect();
    let subsets = draw_subsamples(data.n, &sizes, seed)?;
    fit_on_subsets(data, specs, subsets, opts)
}

/// Fits every member on a given subsample.
pub fn fit_on_subsets(data: &Dataset, specs: &[MemberSpec], subsets: Vec<SubsampleSet>, opts: &FitOptions) -> Result<EnsembleFit> {
    if specs.is_empty() || specs.len() != subsets.len() {
        return Err(Error::Domain(format!("{} member specs for {} subsamples", specs.len(), subsets.len())));
    }
    let mut members = Vec::with_capacity(specs.len());
    let mut failures = Vec::new();
    for (m, (spec, set)) in specs.iter().zip(subsets).enumerate() {
        let (xi, yi) = restrict(&data.x, &data.y, &set.indices);
        match fit(&xi, &yi, &spec.loss, &spec.reg, opts) {
            Ok(res) => members.push((*spec, set, res)),
            Err(e) => failures.push((m, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::ComponentFailures(failures));
    }
    let mut theta_tilde = DVector::zeros(data.p);
    for (_, _, res) in &members {
        theta_tilde += &res.theta_hat;
    }
    theta_tilde /= members.len() as f64;
    Ok(EnsembleFit { members, theta_tilde })
}

/// `||theta~ - theta||^2 / p`.
pub fn empirical_risk(fit: &EnsembleFit, theta_star: &DVector<f64>) -> f64 {
    (&fit.theta_tilde - theta_star).norm_squared() / theta_star.len() as f64
}
