use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fixedpoint::{CellTheory, Component, Engine, EnsembleSize, SystemSolution};
use crate::prox::{LossSpec, RegSpec};

/// Cartesian grid of theory cells. Empty `lambdas` or `rhos` keep the level
/// of `reg` and the Huber parameter of `loss`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub loss: LossSpec,
    pub reg: RegSpec,
    pub deltas: Vec<f64>,
    pub cs: Vec<f64>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub rhos: Vec<f64>,
    pub sizes: Vec<EnsembleSize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub c: f64,
    pub lambda: f64,
    pub huber_rho: Option<f64>,
    pub m: EnsembleSize,
    pub alpha2: f64,
    pub eta_g: f64,
    pub eta_h: f64,
    pub r1: f64,
    pub r_inf: f64,
    pub r_m: f64,
    pub tau: Option<f64>,
    pub a: Option<f64>,
    pub xi: Option<f64>,
    pub system: Option<SystemSolution>,
    /// `ok` or the error that stopped this cell.
    pub status: String,
    /// `c*` marks the best `c` within its `(delta, lambda, rho, M)` group,
    /// `lambda*` the best level within its `(delta, rho, c, M)` group.
    pub argmin: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn huber_rho(loss: &LossSpec) -> Option<f64> {
    match *loss {
        LossSpec::Huber { rho } => Some(rho),
        LossSpec::Square => None,
    }
}

/// Evaluates every grid cell (in parallel) and returns rows in grid order:
/// `delta`, then `lambda`, `rho`, `c`, and `M` innermost.
pub fn sweep(engine: &Engine, grid: &SweepGrid) -> Vec<SweepRow> {
    let regs: Vec<RegSpec> = if grid.lambdas.is_empty() {
        vec![grid.reg]
    } else {
        grid.lambdas.iter().map(|&l| grid.reg.with_level(l)).collect()
    };
    let losses: Vec<LossSpec> = match (grid.loss, grid.rhos.is_empty()) {
        (LossSpec::Huber { .. }, false) => grid.rhos.iter().map(|&rho| LossSpec::Huber { rho }).collect(),
        _ => vec![grid.loss],
    };
    let mut cells = Vec::new();
    for &delta in &grid.deltas {
        for reg in &regs {
            for loss in &losses {
                for &c in &grid.cs {
                    cells.push((delta, Component { loss: *loss, reg: *reg, c }));
                }
            }
        }
    }
    let theories: Vec<Result<CellTheory, String>> = cells
        .par_iter()
        .map(|(delta, comp)| engine.cell_theory(comp, *delta).map_err(|e| e.to_string()))
        .collect();

    let mut rows = Vec::with_capacity(cells.len() * grid.sizes.len());
    for ((delta, comp), theory) in cells.iter().zip(&theories) {
        for &m in &grid.sizes {
            let base = SweepRow {
                delta: *delta,
                c: comp.c,
                lambda: comp.reg.level(),
                huber_rho: huber_rho(&comp.loss),
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
                status: String::new(),
                argmin: String::new(),
            };
            rows.push(match theory {
                Ok(t) => SweepRow {
                    alpha2: t.alpha2(),
                    eta_g: t.eta_g,
                    eta_h: t.eta_h,
                    r1: t.r1,
                    r_inf: t.r_inf,
                    r_m: t.risk(m),
                    tau: t.tau,
                    a: t.a,
                    xi: t.xi,
                    system: t.system,
                    status: "ok".into(),
                    ..base
                },
                Err(e) => SweepRow { status: e.clone(), ..base },
            });
        }
    }
    mark_argmin(&mut rows, |r| (key(r.delta), key(r.lambda), r.huber_rho.map(key), r.m.to_string()), |r| r.c, "c*");
    if regs.len() > 1 {
        mark_argmin(&mut rows, |r| (key(r.delta), key(r.c), r.huber_rho.map(key), r.m.to_string()), |r| r.lambda, "lambda*");
    }
    rows
}

fn key(v: f64) -> u64 {
    v.to_bits()
}

/// Within each group, marks the ok row of least `R_M`; exact ties go to the
/// smallest value of the swept coordinate.
fn mark_argmin<K: Eq + std::hash::Hash>(
    rows: &mut [SweepRow],
    group: impl Fn(&SweepRow) -> K,
    coord: impl Fn(&SweepRow) -> f64,
    label: &str,
) {
    let mut best: std::collections::HashMap<K, usize> = std::collections::HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        if !row.is_ok() || !row.r_m.is_finite() {
            continue;
        }
        let slot = best.entry(group(row)).or_insert(i);
        let cur = &rows[*slot];
        if row.r_m < cur.r_m || (row.r_m == cur.r_m && coord(row) < coord(cur)) {
            *slot = i;
        }
    }
    for i in best.into_values() {
        let row = &mut rows[i];
        if !row.argmin.is_empty() {
            row.argmin.push(';');
        }
        row.argmin.push_str(label);
    }
}
