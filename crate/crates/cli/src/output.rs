//! `results.csv` and `manifest.json`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{Diagnostic, ExperimentConfig};
use crate::error::RunError;
use crate::run::{Cell, Row};

/// Column order of `results.csv`. The first fourteen columns are always
/// present; the rest are empty where a mode does not produce them.
pub const COLUMNS: [&str; 30] = [
    "delta",
    "c",
    "lambda",
    "M",
    "alpha2",
    "eta_g",
    "eta_h",
    "R1",
    "Rinf",
    "RM",
    "tau",
    "a",
    "xi",
    "status",
    "huber_rho",
    "argmin",
    "alpha",
    "beta",
    "kappa",
    "nu",
    "n",
    "p",
    "k",
    "reps",
    "emp_mean",
    "emp_se",
    "est_mean",
    "est_se",
    "est_gap_mean",
    "est_gap_se",
];

/// Shortest round-trip decimal; NaN and missing values are empty.
fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn count(v: Option<usize>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn record(row: &Row) -> Vec<String> {
    let t = &row.theory;
    let sys = t.system.as_ref();
    vec![
        num(t.delta),
        num(t.c),
        num(t.lambda),
        t.m.to_string(),
        num(t.alpha2),
        num(t.eta_g),
        num(t.eta_h),
        num(t.r1),
        num(t.r_inf),
        num(t.r_m),
        opt(t.tau),
        opt(t.a),
        opt(t.xi),
        row.status.clone(),
        opt(t.huber_rho),
        t.argmin.clone(),
        opt(sys.map(|s| s.alpha)),
        opt(sys.map(|s| s.beta)),
        opt(sys.map(|s| s.kappa)),
        opt(sys.map(|s| s.nu)),
        count(row.n),
        count(row.p),
        count(row.k),
        if row.n.is_some() { row.reps.to_string() } else { String::new() },
        opt(row.emp.map(|s| s.mean)),
        opt(row.emp.map(|s| s.se)),
        opt(row.est.map(|s| s.mean)),
        opt(row.est.map(|s| s.se)),
        opt(row.est_gap.map(|s| s.mean)),
        opt(row.est_gap.map(|s| s.se)),
    ]
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub subag_cli: String,
    pub subag_core: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self { subag_cli: env!("CARGO_PKG_VERSION").into(), subag_core: subag_core::VERSION.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub base_seed: u64,
    pub scheme: String,
    /// Empirical cells with the key their replication seeds derive from.
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// The effective configuration; `subag <mode> --config manifest.json`
    /// reruns it.
    pub config: ExperimentConfig,
    pub versions: Versions,
    pub seeds: SeedReport,
    pub workers: usize,
    pub started_unix: u64,
    pub wall_time_secs: f64,
    pub rows: usize,
    pub failed_rows: usize,
    pub diagnostics: Vec<Diagnostic>,
}

pub const SEED_SCHEME: &str = "replication r of a cell uses s = derive_seed(base_seed, [cell.key, r]); \
the dataset is drawn from derive_seed(s, [0]) and the subsamples from derive_seed(s, [1]); \
ensembles of every size share the first members of one fit";
