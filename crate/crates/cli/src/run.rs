//! Grid execution: theory rows, replicated fits and their aggregation.

use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use subag_core::fixedpoint::{sweep, Engine, EnsembleSize, SweepGrid, SweepRow};
use subag_core::mestim::{ensemble_fit, MemberSpec};
use subag_core::prox::{LossSpec, RegSpec};
use subag_core::randmodel::gen_data;
use subag_core::riskest::est_ensemble;
use subag_core::seed::derive_seed;

use crate::config::{on_threshold, validate, Axes, ExperimentConfig, Mode};
use crate::error::RunError;

/// One output row: the theory columns plus Monte Carlo summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub theory: SweepRow,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub k: Option<usize>,
    /// Replications that produced a risk.
    pub reps: usize,
    pub emp: Option<Summary>,
    pub est: Option<Summary>,
    /// `EST - (risk + ||noise||^2 / n)` per replication.
    pub est_gap: Option<Summary>,
    /// `ok`, or every failure met while producing the row.
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; NaN for one value.
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Some(Self { mean, se })
    }
}

/// Coordinates of an empirical cell; replications of a cell share nothing
/// with other cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub loss: LossSpec,
    pub reg: RegSpec,
    pub k: usize,
    /// Mixed with the base seed and the replication index.
    pub key: u64,
}

impl Cell {
    fn new(loss: LossSpec, reg: RegSpec, k: usize) -> Self {
        let rho = match loss {
            LossSpec::Huber { rho } => rho.to_bits(),
            LossSpec::Square => 0,
        };
        let key = derive_seed(reg.level().to_bits(), &[reg.l1().to_bits(), reg.l2().to_bits(), rho, k as u64]);
        Self { loss, reg, k, key }
    }

    pub fn seed(&self, base: u64, rep: usize) -> u64 {
        derive_seed(base, &[self.key, rep as u64])
    }
}

/// Empirical cells in output order: level, then Huber threshold, then `c`.
pub fn cells(cfg: &ExperimentConfig, axes: &Axes, n: usize, delta: f64) -> Vec<Cell> {
    let mut out = Vec::new();
    for reg in axes.regs(&cfg.ensemble.reg) {
        for loss in axes.losses(&cfg.ensemble.loss) {
            for &c in &axes.cs {
                let k = (c * n as f64).round() as usize;
                if !on_threshold(&loss, &reg, k as f64 / n as f64, delta) {
                    out.push(Cell::new(loss, reg, k));
                }
            }
        }
    }
    out
}

struct RepOut {
    risks: Vec<f64>,
    /// Per size: `(EST, risk + ||noise||^2 / n)`.
    est: Option<Result<Vec<(f64, f64)>, String>>,
}

fn replicate(cfg: &ExperimentConfig, cell: &Cell, rep: usize, sizes: &[usize], dump: Option<&Path>) -> Result<RepOut, String> {
    let (n, p) = (cfg.model.n.unwrap_or(0), cfg.model.p.unwrap_or(0));
    let seed = cell.seed(cfg.base_seed, rep);
    let data = gen_data(n, p, &cfg.model.signal, &cfg.model.noise, derive_seed(seed, &[0])).map_err(|e| e.to_string())?;
    if let Some(dir) = dump {
        data.export(&dir.join(format!("cell{:016x}_rep{rep}.bin", cell.key))).map_err(|e| e.to_string())?;
    }
    let m_max = sizes.iter().copied().max().unwrap_or(1);
    let spec = MemberSpec { loss: cell.loss, reg: cell.reg, k: cell.k };
    let fit = ensemble_fit(&data, &vec![spec; m_max], derive_seed(seed, &[1]), &cfg.fit).map_err(|e| e.to_string())?;

    let mut risks = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let mut theta = DVector::zeros(p);
        for (_, _, res) in &fit.members[..m] {
            theta += &res.theta_hat;
        }
        theta /= m as f64;
        risks.push((theta - &data.theta_star).norm_squared() / p as f64);
    }
    let est = (cfg.mode == Mode::Estimate).then(|| {
        let floor = data.noise.norm_squared() / n as f64;
        est_ensemble(&fit, &data).map_err(|e| e.to_string()).map(|e| {
            sizes
                .iter()
                .zip(&risks)
                .map(|(&m, risk)| {
                    let block: f64 = e.pairs[..m].iter().map(|row| row[..m].iter().sum::<f64>()).sum();
                    (block / (m * m) as f64, risk + floor)
                })
                .collect()
        })
    });
    Ok(RepOut { risks, est })
}

fn blank_theory(delta: f64, c: f64, reg: &RegSpec, loss: &LossSpec, m: EnsembleSize) -> SweepRow {
    SweepRow {
        delta,
        c,
        lambda: reg.level(),
        huber_rho: match loss {
            LossSpec::Huber { rho } => Some(*rho),
            LossSpec::Square => None,
        },
        m,
        alpha2: f64::NAN,
        eta_g: f64::NAN,
        eta_h: f64::NAN,
        r1: f64::NAN,
        r_inf: f64::NAN,
        r_m: f64::NAN,
        tau: None,
        a: None,
        xi: None,
        system: None,
        status: "ok".into(),
        argmin: String::new(),
    }
}

fn theory_rows(cfg: &ExperimentConfig, axes: &Axes) -> Result<Vec<SweepRow>, RunError> {
    let engine = Engine::new(&cfg.model.signal, &cfg.model.noise, &cfg.quadrature)?;
    let grid = SweepGrid {
        loss: cfg.ensemble.loss,
        reg: cfg.ensemble.reg,
        deltas: axes.deltas.clone(),
        cs: axes.cs.clone(),
        lambdas: axes.lambdas.clone(),
        rhos: axes.rhos.clone(),
        sizes: axes.sizes.clone(),
    };
    Ok(sweep(&engine, &grid))
}

fn row_reg(cfg: &ExperimentConfig, axes: &Axes, row: &SweepRow) -> RegSpec {
    if axes.lambdas.is_empty() {
        cfg.ensemble.reg
    } else {
        cfg.ensemble.reg.with_level(row.lambda)
    }
}

fn row_loss(row: &SweepRow) -> LossSpec {
    row.huber_rho.map_or(LossSpec::Square, |rho| LossSpec::Huber { rho })
}

/// Runs every cell and returns rows in grid order. Replications run on the
/// current rayon pool; reductions are sequential, so the result does not
/// depend on the number of workers.
pub fn execute(cfg: &ExperimentConfig, dump: Option<&Path>) -> Result<Vec<Row>, RunError> {
    let diags = validate(cfg);
    if diags.iter().any(|d| d.is_error()) {
        return Err(RunError::Invalid(diags.into_iter().filter(|d| d.is_error()).collect()));
    }
    let mut axes = cfg.axes();
    if !cfg.mode.is_empirical() {
        let rows = theory_rows(cfg, &axes)?;
        return Ok(rows
            .into_iter()
            .filter(|r| !on_threshold(&row_loss(r), &row_reg(cfg, &axes, r), r.c, r.delta))
            .map(|theory| Row {
                status: theory.status.clone(),
                theory,
                n: None,
                p: None,
                k: None,
                reps: 0,
                emp: None,
                est: None,
                est_gap: None,
            })
            .collect());
    }

    let (n, p) = (cfg.model.n.unwrap_or(0), cfg.model.p.unwrap_or(0));
    let delta = n as f64 / p as f64;
    let cells = cells(cfg, &axes, n, delta);
    let sizes: Vec<usize> = axes
        .sizes
        .iter()
        .map(|s| match s {
            EnsembleSize::Finite(m) => *m,
            EnsembleSize::Infinite => unreachable!("rejected by validate"),
        })
        .collect();

    let theory: Vec<SweepRow> = if cfg.mode.has_theory() {
        axes.deltas = vec![delta];
        axes.cs = axes.cs.iter().map(|&c| (c * n as f64).round() / n as f64).collect();
        theory_rows(cfg, &axes)?.into_iter().filter(|r| !on_threshold(&row_loss(r), &row_reg(cfg, &axes, r), r.c, r.delta)).collect()
    } else {
        cells
            .iter()
            .flat_map(|cell| axes.sizes.iter().map(move |&m| blank_theory(delta, cell.k as f64 / n as f64, &cell.reg, &cell.loss, m)))
            .collect()
    };

    let dump_dir = dump.map(|d| d.join("datasets"));
    if let Some(dir) = &dump_dir {
        std::fs::create_dir_all(dir)?;
    }
    let work: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.replications).map(move |r| (c, r))).collect();
    let outs: Vec<Result<RepOut, String>> =
        work.par_iter().map(|&(c, r)| replicate(cfg, &cells[c], r, &sizes, dump_dir.as_deref())).collect();

    let mut rows = Vec::with_capacity(theory.len());
    let mut theory = theory.into_iter();
    for (ci, cell) in cells.iter().enumerate() {
        let reps = &outs[ci * cfg.replications..(ci + 1) * cfg.replications];
        let mut failures: Vec<String> = Vec::new();
        for (r, out) in reps.iter().enumerate() {
            match out {
                Err(e) => failures.push(format!("replication {r}: {e}")),
                Ok(RepOut { est: Some(Err(e)), .. }) => failures.push(format!("replication {r} estimate: {e}")),
                Ok(_) => {}
            }
        }
        for (si, _) in sizes.iter().enumerate() {
            let th = theory.next().expect("one theory row per cell and size");
            let risks: Vec<f64> = reps.iter().filter_map(|o| o.as_ref().ok()).map(|o| o.risks[si]).collect();
            let ests: Vec<(f64, f64)> =
                reps.iter().filter_map(|o| o.as_ref().ok()).filter_map(|o| o.est.as_ref()?.as_ref().ok()).map(|e| e[si]).collect();
            let est_vals: Vec<f64> = ests.iter().map(|e| e.0).collect();
            let gaps: Vec<f64> = ests.iter().map(|e| e.0 - e.1).collect();
            let mut problems: Vec<String> = Vec::new();
            if th.status != "ok" {
                problems.push(th.status.clone());
            }
            problems.extend(failures.iter().cloned());
            rows.push(Row {
                status: if problems.is_empty() { "ok".into() } else { problems.join("; ") },
                theory: th,
                n: Some(n),
                p: Some(p),
                k: Some(cell.k),
                reps: risks.len(),
                emp: Summary::of(&risks),
                est: Summary::of(&est_vals),
                est_gap: Summary::of(&gaps),
            });
        }
    }
    Ok(rows)
}
