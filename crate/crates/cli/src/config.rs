//! Experiment configuration and its validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subag_core::fixedpoint::{EnsembleSize, Interpolator};
use subag_core::mestim::FitOptions;
use subag_core::prox::{LossSpec, RegSpec};
use subag_core::randmodel::{NoiseDist, QuadratureConfig, SignalDist};
use subag_core::riskest::Guarantee;

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Deterministic limits for a single cell or a small grid.
    Theory,
    /// Deterministic limits over a required grid.
    Sweep,
    /// Monte Carlo risk of fitted ensembles.
    Simulate,
    /// Monte Carlo risk together with the data-driven risk estimate.
    Estimate,
    /// Deterministic limits next to Monte Carlo risk.
    Compare,
}

impl Mode {
    pub fn is_empirical(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Estimate | Mode::Compare)
    }

    pub fn has_theory(self) -> bool {
        matches!(self, Mode::Theory | Mode::Sweep | Mode::Compare)
    }
}

/// Ensemble size written as a positive integer or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SizeRepr", into = "SizeRepr")]
pub struct Size(pub EnsembleSize);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SizeRepr {
    Count(usize),
    Label(String),
}

impl TryFrom<SizeRepr> for Size {
    type Error = String;

    fn try_from(v: SizeRepr) -> Result<Self, String> {
        match v {
            SizeRepr::Count(0) => Err("ensemble size must be at least 1".into()),
            SizeRepr::Count(m) => Ok(Size(EnsembleSize::Finite(m))),
            SizeRepr::Label(s) if s == "inf" => Ok(Size(EnsembleSize::Infinite)),
            SizeRepr::Label(s) => Err(format!("ensemble size must be a positive integer or \"inf\", got {s:?}")),
        }
    }
}

impl From<Size> for SizeRepr {
    fn from(s: Size) -> Self {
        match s.0 {
            EnsembleSize::Finite(m) => SizeRepr::Count(m),
            EnsembleSize::Infinite => SizeRepr::Label("inf".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub signal: SignalDist,
    pub noise: NoiseDist,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    /// `n / p`; derived from `n` and `p` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl ModelConfig {
    pub fn delta(&self) -> Option<f64> {
        self.delta.or(match (self.n, self.p) {
            (Some(n), Some(p)) if p > 0 => Some(n as f64 / p as f64),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(default = "square")]
    pub loss: LossSpec,
    pub reg: RegSpec,
    /// Subsample ratio `k / n`.
    #[serde(default = "unit")]
    pub c: f64,
    #[serde(rename = "M", default = "single")]
    pub m: Size,
}

fn square() -> LossSpec {
    LossSpec::Square
}

fn unit() -> f64 {
    1.0
}

fn single() -> Size {
    Size(EnsembleSize::Finite(1))
}

/// Optional axes; an absent axis keeps the value from `model` or `ensemble`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    /// Penalty level, applied through [`RegSpec::with_level`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Huber threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Size>>,
}

impl GridConfig {
    fn axes(&self) -> [(&'static str, usize, bool); 5] {
        let len = |a: &Option<Vec<f64>>| (a.as_ref().map_or(0, Vec::len), a.is_some());
        let (d, c, l, r) = (len(&self.delta), len(&self.c), len(&self.lambda), len(&self.rho));
        [
            ("grid.delta", d.0, d.1),
            ("grid.c", c.0, c.1),
            ("grid.lambda", l.0, l.1),
            ("grid.rho", r.0, r.1),
            ("grid.M", self.m.as_ref().map_or(0, Vec::len), self.m.is_some()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelConfig,
    pub ensemble: EnsembleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default = "fit_defaults")]
    pub fit: FitOptions,
    /// Write every replication's dataset under `datasets/`.
    #[serde(default)]
    pub dump_datasets: bool,
}

fn one() -> usize {
    1
}

fn fit_defaults() -> FitOptions {
    FitOptions { interpolate: true, ..FitOptions::default() }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Resolved axes of a run, in output order.
#[derive(Debug, Clone, PartialEq)]
pub struct Axes {
    pub deltas: Vec<f64>,
    pub cs: Vec<f64>,
    /// Empty keeps the level of `ensemble.reg`.
    pub lambdas: Vec<f64>,
    /// Empty keeps the threshold of `ensemble.loss`.
    pub rhos: Vec<f64>,
    pub sizes: Vec<EnsembleSize>,
}

impl Axes {
    pub fn regs(&self, base: &RegSpec) -> Vec<RegSpec> {
        if self.lambdas.is_empty() {
            vec![*base]
        } else {
            self.lambdas.iter().map(|&l| base.with_level(l)).collect()
        }
    }

    pub fn losses(&self, base: &LossSpec) -> Vec<LossSpec> {
        match base {
            LossSpec::Huber { .. } if !self.rhos.is_empty() => self.rhos.iter().map(|&rho| LossSpec::Huber { rho }).collect(),
            _ => vec![*base],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| RunError::Config {
            field: String::new(),
            message: e.message().trim().to_string(),
        })?;
        serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| RunError::Config {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String, RunError> {
        toml::to_string(self).map_err(|e| RunError::Io(e.to_string()))
    }

    /// Reads a TOML config, or the `config` echo of a `.json` manifest.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| RunError::Config {
                field: String::new(),
                message: e.to_string(),
            })?;
            let config = value.get("config").cloned().ok_or_else(|| RunError::Config {
                field: "config".into(),
                message: "manifest has no config echo".into(),
            })?;
            return serde_path_to_error::deserialize(config).map_err(|e| RunError::Config {
                field: format!("config.{}", e.path()),
                message: e.inner().to_string(),
            });
        }
        Self::from_toml(&text)
    }

    pub fn axes(&self) -> Axes {
        let grid = self.grid.clone().unwrap_or_default();
        let deltas = match (&grid.delta, self.mode.is_empirical()) {
            (Some(d), false) => d.clone(),
            _ => self.model.delta().into_iter().collect(),
        };
        Axes {
            deltas,
            cs: grid.c.unwrap_or_else(|| vec![self.ensemble.c]),
            lambdas: grid.lambda.unwrap_or_default(),
            rhos: grid.rho.unwrap_or_default(),
            sizes: grid.m.map_or_else(|| vec![self.ensemble.m.0], |v| v.into_iter().map(|s| s.0).collect()),
        }
    }

    /// Largest finite ensemble size on the grid.
    pub fn max_members(&self) -> usize {
        self.axes()
            .sizes
            .iter()
            .filter_map(|s| match s {
                EnsembleSize::Finite(m) => Some(*m),
                EnsembleSize::Infinite => None,
            })
            .max()
            .unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, field: field.into(), message: message.into() }
    }

    fn warning(field: &str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, field: field.into(), message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// `c * delta = 1` for an interpolator cell, where the limit does not exist.
pub fn on_threshold(loss: &LossSpec, reg: &RegSpec, c: f64, delta: f64) -> bool {
    *loss == LossSpec::Square && Interpolator::from_reg(reg).is_some() && (c * delta - 1.0).abs() < 1e-12
}

/// Errors block a run; warnings are reported and the run proceeds.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let axes = cfg.axes();
    let field = |axis: &str, base: &str| if cfg.grid.as_ref().is_some_and(|g| g.axes().iter().any(|a| a.0 == axis && a.2)) { axis.to_string() } else { base.to_string() };
    let c_field = field("grid.c", "ensemble.c");
    let m_field = field("grid.M", "ensemble.M");

    if let Err(e) = cfg.model.signal.validate() {
        out.push(Diagnostic::error("model.signal", e.to_string()));
    }
    if let Err(e) = cfg.model.noise.validate() {
        out.push(Diagnostic::error("model.noise", e.to_string()));
    }
    if let Err(e) = cfg.quadrature.validate() {
        out.push(Diagnostic::error("quadrature", e.to_string()));
    }
    if let Err(e) = cfg.ensemble.loss.validate() {
        out.push(Diagnostic::error("ensemble.loss", e.to_string()));
    }
    if let Err(e) = cfg.ensemble.reg.validate() {
        out.push(Diagnostic::error("ensemble.reg", e.to_string()));
    }

    match &cfg.grid {
        None if cfg.mode == Mode::Sweep => out.push(Diagnostic::error("grid", "sweep mode needs at least one grid axis")),
        Some(g) => {
            for (name, len, present) in g.axes() {
                if present && len == 0 {
                    out.push(Diagnostic::error(name, "grid axis is empty"));
                }
            }
            if cfg.mode == Mode::Sweep && g.axes().iter().all(|a| !a.2) {
                out.push(Diagnostic::error("grid", "sweep mode needs at least one grid axis"));
            }
            if g.rho.is_some() && !matches!(cfg.ensemble.loss, LossSpec::Huber { .. }) {
                out.push(Diagnostic::error("grid.rho", "a Huber threshold axis needs ensemble.loss of kind huber"));
            }
            if g.delta.is_some() && cfg.mode.is_empirical() {
                out.push(Diagnostic::error("grid.delta", "simulation modes take delta from model.n and model.p"));
            }
        }
        None => {}
    }

    if cfg.mode.is_empirical() {
        if cfg.replications == 0 {
            out.push(Diagnostic::error("replications", "at least one replication is needed"));
        }
        match (cfg.model.n, cfg.model.p) {
            (Some(n), Some(p)) if n > 0 && p > 0 => {
                if let Some(d) = cfg.model.delta {
                    if (d - n as f64 / p as f64).abs() > 1e-12 * d.abs().max(1.0) {
                        out.push(Diagnostic::error("model.delta", format!("delta = {d} disagrees with n / p = {}", n as f64 / p as f64)));
                    }
                }
                for &c in &axes.cs {
                    if (c * n as f64).round() < 1.0 {
                        out.push(Diagnostic::error(&c_field, format!("c = {c} leaves an empty subsample at n = {n}")));
                    }
                }
            }
            (n, _) => {
                let name = if n.is_none_or(|n| n == 0) { "model.n" } else { "model.p" };
                out.push(Diagnostic::error(name, "simulation modes need positive model.n and model.p"));
            }
        }
        if axes.sizes.contains(&EnsembleSize::Infinite) {
            out.push(Diagnostic::error(&m_field, "\"inf\" is only available in theory and sweep modes"));
        }
    } else if axes.deltas.is_empty() {
        out.push(Diagnostic::error("model.delta", "set model.delta, model.n and model.p, or grid.delta"));
    }

    for &d in &axes.deltas {
        if !(d > 0.0 && d.is_finite()) {
            out.push(Diagnostic::error(&field("grid.delta", "model.delta"), format!("delta must be positive and finite, got {d}")));
        }
    }
    for &c in &axes.cs {
        if !(c > 0.0 && c <= 1.0) {
            out.push(Diagnostic::error(&c_field, format!("c must lie in (0, 1], got {c}")));
        }
    }
    for &l in &axes.lambdas {
        if !(l >= 0.0 && l.is_finite()) {
            out.push(Diagnostic::error("grid.lambda", format!("penalty level must be nonnegative and finite, got {l}")));
        }
    }
    for &r in &axes.rhos {
        if !(r > 0.0 && r.is_finite()) {
            out.push(Diagnostic::error("grid.rho", format!("Huber threshold must be positive and finite, got {r}")));
        }
    }
    if out.iter().any(Diagnostic::is_error) {
        return out;
    }

    if axes.cs.contains(&1.0) && axes.sizes.iter().any(|s| *s != EnsembleSize::Finite(1)) {
        out.push(Diagnostic::warning(
            &c_field,
            "contraction hypothesis min{c,c̃}<1 violated at c = 1; members on the full sample coincide and the pair correlation is set to 1",
        ));
    }
    let regs = axes.regs(&cfg.ensemble.reg);
    let losses = axes.losses(&cfg.ensemble.loss);
    let deltas = if cfg.mode.is_empirical() { cfg.model.delta().into_iter().collect() } else { axes.deltas.clone() };
    let mut skipped = Vec::new();
    for reg in &regs {
        for loss in &losses {
            for &d in &deltas {
                for &c in &axes.cs {
                    if on_threshold(loss, reg, c, d) && !skipped.contains(&(c, d)) {
                        skipped.push((c, d));
                    }
                }
            }
        }
    }
    for (c, d) in skipped {
        out.push(Diagnostic::warning(&c_field, format!("c = {c}, delta = {d} sits on the interpolation threshold c*delta = 1 and is skipped")));
    }
    if cfg.mode == Mode::Estimate {
        if let Some(reg) = regs.iter().find(|r| Guarantee::of(r) == Guarantee::Empirical) {
            let what = if reg.l1() > 0.0 { "a lasso penalty" } else { "an unpenalized or ridgeless fit" };
            out.push(Diagnostic::warning(
                "ensemble.reg",
                format!("the risk estimate for {what} lacks the strong-convexity guarantee; its consistency is only observed empirically"),
            ));
        }
    }
    out
}
