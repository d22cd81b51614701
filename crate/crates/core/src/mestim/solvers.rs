//! Numerical kernels behind [`super::fit`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prox::{soft_threshold, LossSpec, Prox, RegSpec};

pub(crate) fn loss_sum(loss: &LossSpec, r: &DVector<f64>) -> f64 {
    r.iter().map(|&v| loss.value(v)).sum()
}

pub(crate) fn objective(loss: &LossSpec, reg: &RegSpec, x: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    let r = y - x * theta;
    loss_sum(loss, &r) + theta.iter().map(|&t| reg.value(t)).sum::<f64>()
}

/// Stationarity defect of `sum loss(y - X theta) + sum g(theta_j)` given
/// `score = X^T loss'(r)`: zero coordinates only need `|score_j| <= lambda2`.
pub(crate) fn kkt_from_score(reg: &RegSpec, theta: &DVector<f64>, score: &DVector<f64>) -> f64 {
    let (l1, l2) = (reg.l2(), reg.l1());
    theta
        .iter()
        .zip(score.iter())
        .map(|(&t, &s)| {
            if t != 0.0 {
                (s - l1 * t - l2 * t.signum()).abs()
            } else {
                (s.abs() - l2).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `(X^T X + lambda I)^{-1} X^T y`, through the `k x k` dual system when `k < p`.
pub(crate) fn ridge_direct(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let (k, p) = x.shape();
    if k >= p {
        let mut gram = x.tr_mul(x);
        for j in 0..p {
            gram[(j, j)] += lambda;
        }
        let chol = gram.cholesky().ok_or_else(|| Error::LinAlg("normal equations are not positive definite".into()))?;
        Ok(chol.solve(&x.tr_mul(y)))
    } else {
        let mut kernel = x * x.transpose();
        for i in 0..k {
            kernel[(i, i)] += lambda;
        }
        let chol = kernel.cholesky().ok_or_else(|| Error::LinAlg("kernel system is not positive definite".into()))?;
        Ok(x.tr_mul(&chol.solve(y)))
    }
}

/// Minimum l2-norm solution of `X theta = y` for a wide design.
pub(crate) fn min_norm(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    ridge_direct(x, y, 0.0)
}

/// Cyclic coordinate descent for square loss with an elastic-net penalty on
/// the Gram form `G = X^T X`, `b = X^T y`. Sweeps the full coordinate set,
/// then cycles on the active set until it settles.
pub(crate) struct GramCd<'a> {
    pub gram: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
    /// Rank bound on `G`; supports larger than this make the active-set
    /// systems singular.
    pub rows: usize,
}

impl GramCd<'_> {
    pub fn solve(&self, reg: &RegSpec, theta: &mut DVector<f64>, tol: f64, max_sweeps: usize) -> Result<usize> {
        let (l1, l2) = (reg.l2(), reg.l1());
        let p = theta.len();
        let mut score = self.b - self.gram * &*theta;
        let mut sweeps = 0;
        if self.try_active_set(reg, theta, tol) {
            return Ok(0);
        }
        let update = |j: usize, theta: &mut DVector<f64>, score: &mut DVector<f64>| -> f64 {
            let gjj = self.gram[(j, j)];
            if gjj == 0.0 && l1 == 0.0 {
                return 0.0;
            }
            let z = score[j] + gjj * theta[j];
            let new = soft_threshold(z, l2) / (gjj + l1);
            let delta = new - theta[j];
            if delta != 0.0 {
                score.axpy(-delta, &self.gram.column(j), 1.0);
                theta[j] = new;
            }
            delta.abs() * gjj.sqrt().max(1e-12)
        };
        while sweeps < max_sweeps {
            sweeps += 1;
            for j in 0..p {
                update(j, theta, &mut score);
            }
            let kkt = kkt_from_score(reg, theta, &score);
            if kkt < tol {
                return Ok(sweeps);
            }
            if self.try_active_set(reg, theta, tol) {
                return Ok(sweeps);
            }
            score = self.b - self.gram * &*theta;
            let active: Vec<usize> = (0..p).filter(|&j| theta[j] != 0.0).collect();
            let mut inner = 0;
            while inner < 50 && sweeps < max_sweeps {
                inner += 1;
                sweeps += 1;
                let mut moved: f64 = 0.0;
                for &j in &active {
                    moved = moved.max(update(j, theta, &mut score));
                }
                if moved < 0.1 * tol {
                    break;
                }
            }
            // Refresh to shed accumulated rounding in the running score.
            score = self.b - self.gram * &*theta;
        }
        Err(Error::NoConvergence {
            what: "coordinate descent",
            iterations: sweeps,
            residual: kkt_from_score(reg, theta, &score),
            last: Vec::new(),
        })
    }
}

impl GramCd<'_> {
    fn try_active_set(&self, reg: &RegSpec, theta: &mut DVector<f64>, tol: f64) -> bool {
        let support = theta.iter().filter(|v| **v != 0.0).count();
        if support > self.rows && reg.l2() == 0.0 {
            return false;
        }
        let before = theta.clone();
        if self.active_set(reg, theta, tol).is_some() {
            return true;
        }
        if !theta.iter().all(|v| v.is_finite()) {
            *theta = before;
        }
        false
    }

    /// Exact piecewise-linear lasso path from `lambda_max` down to the
    /// target level, adding and dropping one coordinate per event. Stays on
    /// supports of full column rank, so it suits wide designs where the
    /// active-set finish stalls. Returns the number of events.
    pub fn lars(&self, reg: &RegSpec, theta: &mut DVector<f64>) -> Option<usize> {
        let (ridge, target) = (reg.l2(), reg.l1());
        let p = theta.len();
        theta.fill(0.0);
        let mut score = self.b.clone();
        let mut level = score.amax();
        let mut active: Vec<usize> = Vec::new();
        let mut signs: Vec<f64> = Vec::new();
        if level <= target {
            return Some(0);
        }
        let first = score.iamax();
        active.push(first);
        signs.push(score[first].signum());
        let mut dropped = None;
        for event in 1..8 * p + 10 {
            let mut sub = self.gram.select_rows(&active).select_columns(&active);
            for i in 0..active.len() {
                sub[(i, i)] += ridge;
            }
            let dir = sub.cholesky()?.solve(&DVector::from_column_slice(&signs));
            let mut gd = DVector::zeros(p);
            for (&j, &d) in active.iter().zip(dir.iter()) {
                gd.axpy(d, &self.gram.column(j), 1.0);
            }
            let mut gamma = level - target;
            let mut event_kind = None;
            let eps = 1e-12 * level;
            for j in 0..p {
                if active.contains(&j) || dropped == Some(j) {
                    continue;
                }
                for (num, den, sg) in [(level - score[j], 1.0 - gd[j], 1.0), (level + score[j], 1.0 + gd[j], -1.0)] {
                    if den > 0.0 {
                        let g = num / den;
                        if g > eps && g < gamma {
                            gamma = g;
                            event_kind = Some((j, sg, true));
                        }
                    }
                }
            }
            for (i, (&j, &d)) in active.iter().zip(dir.iter()).enumerate() {
                let g = -theta[j] / d;
                if g > eps && g < gamma {
                    gamma = g;
                    event_kind = Some((i, 0.0, false));
                }
            }
            for (&j, &d) in active.iter().zip(dir.iter()) {
                theta[j] += gamma * d;
            }
            score.axpy(-gamma, &gd, 1.0);
            for (&j, &d) in active.iter().zip(dir.iter()) {
                score[j] -= gamma * ridge * d;
            }
            level -= gamma;
            dropped = None;
            match event_kind {
                None => return Some(event),
                Some((j, sg, true)) => {
                    active.push(j);
                    signs.push(sg);
                }
                Some((i, _, false)) => {
                    let j = active.remove(i);
                    signs.remove(i);
                    theta[j] = 0.0;
                    dropped = Some(j);
                }
            }
        }
        None
    }

    /// Primal active-set finish from the current iterate: solve the
    /// stationarity equations on the signed support, step back to the first
    /// sign change if one occurs, otherwise admit the worst violator. Every
    /// step lowers the objective. Returns the final defect when it reaches
    /// `tol`; `theta` keeps the progress either way.
    fn active_set(&self, reg: &RegSpec, theta: &mut DVector<f64>, tol: f64) -> Option<f64> {
        let (l1, l2) = (reg.l2(), reg.l1());
        let p = theta.len();
        let mut active: Vec<usize> = (0..p).filter(|&j| theta[j] != 0.0).collect();
        let mut signs: Vec<f64> = active.iter().map(|&j| theta[j].signum()).collect();
        for _ in 0..4 * p + 10 {
            if !active.is_empty() {
                let mut sub = self.gram.select_rows(&active).select_columns(&active);
                for i in 0..active.len() {
                    sub[(i, i)] += l1;
                }
                let rhs = DVector::from_iterator(active.len(), active.iter().zip(&signs).map(|(&j, &sg)| self.b[j] - l2 * sg));
                let sol = sub.cholesky()?.solve(&rhs);
                // Largest step toward `sol` that keeps every sign.
                let mut step = 1.0;
                let mut blocking = None;
                for (i, (&j, &v)) in active.iter().zip(sol.iter()).enumerate() {
                    if v * signs[i] <= 0.0 {
                        let frac = theta[j] / (theta[j] - v);
                        if frac < step {
                            step = frac;
                            blocking = Some(i);
                        }
                    }
                }
                for (&j, &v) in active.iter().zip(sol.iter()) {
                    theta[j] += step * (v - theta[j]);
                }
                if let Some(i) = blocking {
                    theta[active[i]] = 0.0;
                    active.remove(i);
                    signs.remove(i);
                    continue;
                }
            }
            let score = self.b - self.gram * &*theta;
            let kkt = kkt_from_score(reg, theta, &score);
            if kkt < tol {
                return Some(kkt);
            }
            let worst = (0..p)
                .filter(|&j| theta[j] == 0.0)
                .max_by(|&i, &j| score[i].abs().total_cmp(&score[j].abs()))?;
            if score[worst].abs() <= l2 {
                // Only rounding on the support remains.
                return None;
            }
            active.push(worst);
            signs.push(score[worst].signum());
        }
        None
    }
}

/// Largest eigenvalue of `X^T X` from 20 power iterations.
pub(crate) fn op_norm_sq(x: &DMatrix<f64>) -> f64 {
    let p = x.ncols();
    let mut v = DVector::from_fn(p, |j, _| 1.0 + 0.01 * ((j * 7919) % 101) as f64);
    v.normalize_mut();
    let mut est = 0.0;
    for _ in 0..20 {
        let w = x.tr_mul(&(x * &v));
        est = w.norm();
        if est == 0.0 {
            return 0.0;
        }
        v = w / est;
    }
    est
}

const FLAT_WINDOW: usize = 100;

pub(crate) struct FistaOutcome {
    pub theta: DVector<f64>,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Monotone FISTA with backtracking and restart on objective increase.
///
/// Stops when the stationarity defect drops below `tol`, or on stagnation:
/// `FLAT_WINDOW` consecutive iterations that change the objective by less
/// than `1e-12` relatively.
#[allow(clippy::too_many_arguments)]
pub(crate) fn mfista(
    loss: &LossSpec,
    reg: &RegSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    theta0: DVector<f64>,
    tol: f64,
    max_iter: usize,
    record: bool,
) -> Result<FistaOutcome> {
    let smooth = |th: &DVector<f64>| -> (f64, DVector<f64>) {
        let r = y - x * th;
        (loss_sum(loss, &r), r)
    };
    let penalty = |th: &DVector<f64>| th.iter().map(|&t| reg.value(t)).sum::<f64>();
    let score_of = |r: &DVector<f64>| x.tr_mul(&r.map(|v| loss.derivative(v)));

    let mut lip = (loss.lipschitz() * op_norm_sq(x)).max(1e-12);
    let mut cur = theta0;
    let (f_cur, r_cur) = smooth(&cur);
    let mut obj_cur = f_cur + penalty(&cur);
    let mut kkt = kkt_from_score(reg, &cur, &score_of(&r_cur));
    let mut look = cur.clone();
    let mut t = 1.0f64;
    let mut trace = if record { vec![obj_cur] } else { Vec::new() };
    let mut flat_steps = 0;
    let mut iterations = 0;
    while iterations < max_iter && kkt >= tol {
        iterations += 1;
        let (f_look, r_look) = smooth(&look);
        let grad = -score_of(&r_look);
        let (z, f_z) = loop {
            let step = 1.0 / lip;
            let z = (&look - &grad * step).map(|v| reg.prox(v, step));
            let dz = &z - &look;
            let (f_z, _) = smooth(&z);
            let bound = f_look + grad.dot(&dz) + 0.5 * lip * dz.norm_squared();
            if f_z <= bound + 1e-12 * f_look.abs().max(1.0) {
                break (z, f_z);
            }
            lip *= 2.0;
        };
        let obj_z = f_z + penalty(&z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // Objective values stop resolving progress near the optimum; steps
        // within rounding of the incumbent are still taken.
        if obj_z <= obj_cur + 1e-14 * obj_cur.abs() {
            let change = (obj_cur - obj_z).abs() / obj_z.abs().max(1e-300);
            let prev = std::mem::replace(&mut cur, z);
            obj_cur = obj_z;
            look = &cur + (&cur - &prev) * ((t - 1.0) / t_next);
            t = t_next;
            flat_steps = if change < 1e-12 { flat_steps + 1 } else { 0 };
        } else {
            look = cur.clone();
            t = 1.0;
            flat_steps += 1;
        }
        if record {
            trace.push(obj_cur);
        }
        let (_, r) = smooth(&cur);
        kkt = kkt_from_score(reg, &cur, &score_of(&r));
        if flat_steps >= FLAT_WINDOW {
            break;
        }
    }
    if kkt >= tol && flat_steps < FLAT_WINDOW {
        return Err(Error::NoConvergence { what: "proximal gradient", iterations, residual: kkt, last: Vec::new() });
    }
    Ok(FistaOutcome { theta: cur, iterations, trace })
}
