//! Experiment runner for subagged M-estimators.
//!
//! A run reads an [`ExperimentConfig`], evaluates the deterministic limits
//! and/or replicated fits over its grid, and writes `results.csv` and
//! `manifest.json` into the output directory.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::{validate, Diagnostic, ExperimentConfig, Mode, Severity};
pub use error::RunError;
pub use output::{write_csv, Manifest, COLUMNS};
pub use run::{execute, Row};

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = cfg.clone();
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        cfg
    }
}

/// Runs `cfg` with `opts` applied and writes the artifacts.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Manifest, RunError> {
    let cfg = opts.apply(cfg);
    let diagnostics = validate(&cfg);
    if diagnostics.iter().any(Diagnostic::is_error) {
        return Err(RunError::Invalid(diagnostics.into_iter().filter(Diagnostic::is_error).collect()));
    }
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Io(e.to_string()))?;
    std::fs::create_dir_all(&cfg.output)?;
    let dump = cfg.dump_datasets.then_some(cfg.output.as_path());
    let rows = pool.install(|| execute(&cfg, dump))?;

    let file = std::fs::File::create(cfg.output.join("results.csv"))?;
    write_csv(&rows, std::io::BufWriter::new(file))?;

    let cells = if cfg.mode.is_empirical() {
        let (n, p) = (cfg.model.n.unwrap_or(0), cfg.model.p.unwrap_or(1));
        run::cells(&cfg, &cfg.axes(), n, n as f64 / p as f64)
    } else {
        Vec::new()
    };
    let manifest = Manifest {
        versions: Default::default(),
        seeds: output::SeedReport { base_seed: cfg.base_seed, scheme: output::SEED_SCHEME.into(), cells },
        workers: pool.current_num_threads(),
        started_unix,
        wall_time_secs: started.elapsed().as_secs_f64(),
        rows: rows.len(),
        failed_rows: rows.iter().filter(|r| r.status != "ok").count(),
        diagnostics,
        config: cfg.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Io(e.to_string()))?;
    std::fs::write(cfg.output.join("manifest.json"), text)?;
    Ok(manifest)
}
