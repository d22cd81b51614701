//! Expectations over the signal law and the noise law.
//!
//! The solvers go through [`SignalIntegrator`] and [`NoiseIntegrator`], which
//! take breakpoints of piecewise-smooth integrands so that kinks of proximal
//! maps never land inside a quadrature panel. [`expect_theta_h`] and
//! [`expect_corr_pair`] are the plain tensor-rule entry points for arbitrary
//! smooth integrands.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::randmodel::dist::{NoiseDist, SignalDist};
use crate::randmodel::quadrature::{GaussHermite, GaussLegendre, NormalRule};
use crate::seed::{derive_seed, rng};

/// How heavy-tailed noise is integrated. Gaussian noise is always exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseQuadrature {
    /// Deterministic rule over the Gaussian scale-mixture representation.
    Nodes { count: usize },
    /// Fixed sample of `(Z, G, G')` triples shared by every evaluation.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Hermite nodes per Gaussian dimension for smooth integrands and
    /// Gaussian signal components.
    pub gauss_nodes: usize,
    /// Legendre nodes per unit panel of the breakpoint-aware rule.
    pub panel_order: usize,
    pub noise: NoiseQuadrature,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            gauss_nodes: 64,
            panel_order: 12,
            noise: NoiseQuadrature::MonteCarlo { samples: 200_000, seed: 0x5eed_2024 },
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gauss_nodes < 8 {
            return Err(Error::Domain(format!("gauss_nodes must be at least 8, got {}", self.gauss_nodes)));
        }
        if self.panel_order < 2 {
            return Err(Error::Domain(format!("panel_order must be at least 2, got {}", self.panel_order)));
        }
        match self.noise {
            NoiseQuadrature::Nodes { count } if count < 6 => {
                Err(Error::Domain(format!("noise node count must be at least 6, got {count}")))
            }
            NoiseQuadrature::MonteCarlo { samples, .. } if samples < 1000 => {
                Err(Error::Domain(format!("Monte Carlo noise needs at least 1000 samples, got {samples}")))
            }
            _ => Ok(()),
        }
    }
}

fn check_finite(v: f64, location: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Integration { location: location() })
    }
}

/// `E[f(Theta, H)]` with a Hermite rule in `H` and the signal's atoms.
pub fn expect_theta_h(f: impl Fn(f64, f64) -> f64, cfg: &QuadratureConfig, signal: &SignalDist) -> Result<f64> {
    let gh = GaussHermite::new(cfg.gauss_nodes);
    let mut total = 0.0;
    for (theta, wt) in signal.atoms(&gh) {
        for (&h, &wh) in gh.nodes.iter().zip(&gh.weights) {
            let v = check_finite(f(theta, h), || format!("theta = {theta}, h = {h}"))?;
            total += wt * wh * v;
        }
    }
    Ok(total)
}

/// Same as [`expect_theta_h`] but with breakpoints in `h` supplied per atom,
/// for integrands with kinks.
pub fn expect_theta_h_piecewise(
    f: impl Fn(f64, f64) -> f64,
    breaks: impl Fn(f64) -> Vec<f64>,
    cfg: &QuadratureConfig,
    signal: &SignalDist,
) -> Result<f64> {
    let rule = NormalRule::new(cfg.panel_order);
    let gh = GaussHermite::new(cfg.gauss_nodes);
    let mut total = 0.0;
    for (theta, wt) in signal.atoms(&gh) {
        for (h, wh) in rule.nodes(&breaks(theta)) {
            let v = check_finite(f(theta, h), || format!("theta = {theta}, h = {h}"))?;
            total += wt * wh * v;
        }
    }
    Ok(total)
}

/// `E[f(Z, G, G~)]` with `G~ = eta G + sqrt(1 - eta^2) G'`.
pub fn expect_corr_pair(
    f: impl Fn(f64, f64, f64) -> f64,
    eta: f64,
    cfg: &QuadratureConfig,
    noise: &NoiseDist,
) -> Result<f64> {
    if !(-1.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("correlation must lie in [-1, 1], got {eta}")));
    }
    let comp = (1.0 - eta * eta).max(0.0).sqrt();
    let gh = GaussHermite::new(cfg.gauss_nodes);
    let law = NoiseLaw::new(noise, cfg);
    let mut total = 0.0;
    match &law {
        NoiseLaw::Mixture(parts) => {
            for &(var, wv) in parts {
                let sd = var.sqrt();
                let zs: Vec<(f64, f64)> = if sd == 0.0 {
                    vec![(0.0, 1.0)]
                } else {
                    gh.nodes.iter().zip(&gh.weights).map(|(&x, &w)| (sd * x, w)).collect()
                };
                for &(z, wz) in &zs {
                    for (&g, &wg) in gh.nodes.iter().zip(&gh.weights) {
                        for (&gb, &wb) in gh.nodes.iter().zip(&gh.weights) {
                            let gt = eta * g + comp * gb;
                            let v = check_finite(f(z, g, gt), || format!("z = {z}, g = {g}, g~ = {gt}"))?;
                            total += wv * wz * wg * wb * v;
                        }
                    }
                }
            }
        }
        NoiseLaw::Samples { z, g, gbar } => {
            for i in 0..z.len() {
                let gt = eta * g[i] + comp * gbar[i];
                let v = check_finite(f(z[i], g[i], gt), || format!("sample {i}"))?;
                total += v;
            }
            total /= z.len() as f64;
        }
    }
    Ok(total)
}

/// Weighted atoms of the signal law with the breakpoint-aware normal rule.
#[derive(Debug, Clone)]
pub struct SignalIntegrator {
    atoms: Vec<(f64, f64)>,
    rule: NormalRule,
}

impl SignalIntegrator {
    pub fn new(signal: &SignalDist, cfg: &QuadratureConfig) -> Self {
        let gh = GaussHermite::new(cfg.gauss_nodes);
        Self { atoms: signal.atoms(&gh), rule: NormalRule::new(cfg.panel_order) }
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|(x, w)| w * x * x).sum()
    }

    fn h_breaks(theta: f64, s: f64, breaks: &[f64]) -> Vec<f64> {
        breaks.iter().map(|&b| (b - theta) / s).collect()
    }

    /// `E[f(Theta, Theta + s H)]` where `f(theta, .)` is smooth between `breaks`.
    pub fn expect(&self, s: f64, breaks: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(theta, wt)| {
                if s == 0.0 {
                    return wt * f(theta, theta);
                }
                let hb = Self::h_breaks(theta, s, breaks);
                wt * self.rule.expect(|h| f(theta, theta + s * h), &hb)
            })
            .sum()
    }

    /// `E[f(Theta, Theta + s H) H]`.
    pub fn expect_h(&self, s: f64, breaks: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        self.atoms
            .iter()
            .map(|&(theta, wt)| {
                let hb = Self::h_breaks(theta, s, breaks);
                wt * self.rule.expect(|h| h * f(theta, theta + s * h), &hb)
            })
            .sum()
    }

    /// `E[f1(Theta, Theta + s1 H) f2(Theta, Theta + s2 H~)]` with `corr(H, H~) = eta`.
    #[allow(clippy::too_many_arguments)]
    pub fn expect_pair(
        &self,
        s1: f64,
        breaks1: &[f64],
        f1: impl Fn(f64, f64) -> f64,
        s2: f64,
        breaks2: &[f64],
        f2: impl Fn(f64, f64) -> f64,
        eta: f64,
    ) -> f64 {
        self.atoms
            .iter()
            .map(|&(theta, wt)| {
                let v = match (s1 == 0.0, s2 == 0.0) {
                    (true, true) => f1(theta, theta) * f2(theta, theta),
                    (true, false) => {
                        let hb = Self::h_breaks(theta, s2, breaks2);
                        f1(theta, theta) * self.rule.expect(|h| f2(theta, theta + s2 * h), &hb)
                    }
                    (false, true) => {
                        let hb = Self::h_breaks(theta, s1, breaks1);
                        f2(theta, theta) * self.rule.expect(|h| f1(theta, theta + s1 * h), &hb)
                    }
                    (false, false) => self.rule.expect_pair(
                        |h| f1(theta, theta + s1 * h),
                        &Self::h_breaks(theta, s1, breaks1),
                        |h| f2(theta, theta + s2 * h),
                        &Self::h_breaks(theta, s2, breaks2),
                        eta,
                    ),
                };
                wt * v
            })
            .sum()
    }
}

/// Noise law in integrable form: a Gaussian scale mixture or a fixed sample.
#[derive(Debug, Clone)]
pub enum NoiseLaw {
    /// `(variance, weight)` components; Gaussian noise has exactly one.
    Mixture(Vec<(f64, f64)>),
    Samples { z: Vec<f64>, g: Vec<f64>, gbar: Vec<f64> },
}

/// Upper end of the substitution variable `y` for Student-t mixing; `exp(-36)` is negligible.
const MIX_Y_MAX: f64 = 6.0;

impl NoiseLaw {
    pub fn new(noise: &NoiseDist, cfg: &QuadratureConfig) -> Self {
        match *noise {
            NoiseDist::Gaussian { sigma } => NoiseLaw::Mixture(vec![(sigma * sigma, 1.0)]),
            NoiseDist::StudentT { dof, scale } => match cfg.noise {
                NoiseQuadrature::Nodes { count } => NoiseLaw::Mixture(student_mixture(dof, scale, count)),
                NoiseQuadrature::MonteCarlo { samples, seed } => {
                    let mut r = rng(derive_seed(seed, &[0x6e6f_6973_65]));
                    let mut z = Vec::with_capacity(samples);
                    let mut g = Vec::with_capacity(samples);
                    let mut gbar = Vec::with_capacity(samples);
                    for _ in 0..samples {
                        z.push(noise.sample(&mut r));
                        g.push(r.sample(StandardNormal));
                        gbar.push(r.sample(StandardNormal));
                    }
                    NoiseLaw::Samples { z, g, gbar }
                }
            },
        }
    }
}

/// Student-t as a Gaussian scale mixture: `Var(Z | W) = scale^2 dof / W`,
/// `W ~ chi^2_dof`. Writing `W = 2 y^2` gives the smooth mixing density
/// `2 y^(dof-1) exp(-y^2) / Gamma(dof/2)` on `y > 0`, integrated panel-wise.
fn student_mixture(dof: f64, scale: f64, count: usize) -> Vec<(f64, f64)> {
    let panels = 6usize;
    let order = count.div_ceil(panels).max(1);
    let gl = GaussLegendre::new(order);
    let mut nodes = Vec::with_capacity(panels * order);
    let width = MIX_Y_MAX / panels as f64;
    for i in 0..panels {
        gl.push_interval(width * i as f64, width * (i + 1) as f64, &mut nodes);
    }
    let log_norm = (2.0f64).ln() - ln_gamma(0.5 * dof);
    let mut parts: Vec<(f64, f64)> = nodes
        .into_iter()
        .map(|(y, w)| {
            let dens = (log_norm + (dof - 1.0) * y.ln() - y * y).exp();
            (scale * scale * dof / (2.0 * y * y), w * dens)
        })
        .collect();
    let total: f64 = parts.iter().map(|p| p.1).sum();
    parts.iter_mut().for_each(|p| p.1 /= total);
    parts
}

/// Expectations of functions of `Z + alpha G` and correlated copies.
#[derive(Debug, Clone)]
pub struct NoiseIntegrator {
    law: NoiseLaw,
    rule: NormalRule,
}

impl NoiseIntegrator {
    pub fn new(noise: &NoiseDist, cfg: &QuadratureConfig) -> Self {
        Self { law: NoiseLaw::new(noise, cfg), rule: NormalRule::new(cfg.panel_order) }
    }

    pub fn law(&self) -> &NoiseLaw {
        &self.law
    }

    /// `E[f(Z + alpha G)]` where `f` is smooth between `breaks`.
    pub fn expect(&self, alpha: f64, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        match &self.law {
            NoiseLaw::Mixture(parts) => parts
                .iter()
                .map(|&(var, w)| {
                    let sd = (var + alpha * alpha).sqrt();
                    if sd == 0.0 {
                        return w * f(0.0);
                    }
                    let b: Vec<f64> = breaks.iter().map(|x| x / sd).collect();
                    w * self.rule.expect(|u| f(sd * u), &b)
                })
                .sum(),
            NoiseLaw::Samples { z, g, .. } => {
                z.iter().zip(g).map(|(&zi, &gi)| f(zi + alpha * gi)).sum::<f64>() / z.len() as f64
            }
        }
    }

    /// `E[f(Z + alpha G) G]`.
    pub fn expect_g(&self, alpha: f64, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        match &self.law {
            NoiseLaw::Mixture(parts) => parts
                .iter()
                .map(|&(var, w)| {
                    let v = var + alpha * alpha;
                    if v == 0.0 {
                        return 0.0;
                    }
                    // E[G | W] = alpha W / v within a Gaussian component
                    let sd = v.sqrt();
                    let b: Vec<f64> = breaks.iter().map(|x| x / sd).collect();
                    w * alpha / v * self.rule.expect(|u| sd * u * f(sd * u), &b)
                })
                .sum(),
            NoiseLaw::Samples { z, g, .. } => {
                z.iter().zip(g).map(|(&zi, &gi)| gi * f(zi + alpha * gi)).sum::<f64>() / z.len() as f64
            }
        }
    }

    /// `E[f1(Z + alpha1 G) f2(Z + alpha2 G~)]` with `corr(G, G~) = eta`.
    #[allow(clippy::too_many_arguments)]
    pub fn expect_pair(
        &self,
        alpha1: f64,
        breaks1: &[f64],
        f1: impl Fn(f64) -> f64,
        alpha2: f64,
        breaks2: &[f64],
        f2: impl Fn(f64) -> f64,
        eta: f64,
    ) -> f64 {
        match &self.law {
            NoiseLaw::Mixture(parts) => parts
                .iter()
                .map(|&(var, w)| {
                    let sd1 = (var + alpha1 * alpha1).sqrt();
                    let sd2 = (var + alpha2 * alpha2).sqrt();
                    if sd1 == 0.0 || sd2 == 0.0 {
                        let e1 = if sd1 == 0.0 { f1(0.0) } else { self.expect_component(sd1, breaks1, &f1) };
                        let e2 = if sd2 == 0.0 { f2(0.0) } else { self.expect_component(sd2, breaks2, &f2) };
                        return w * e1 * e2;
                    }
                    let r = (var + alpha1 * alpha2 * eta) / (sd1 * sd2);
                    let b1: Vec<f64> = breaks1.iter().map(|x| x / sd1).collect();
                    let b2: Vec<f64> = breaks2.iter().map(|x| x / sd2).collect();
                    w * self.rule.expect_pair(|u| f1(sd1 * u), &b1, |y| f2(sd2 * y), &b2, r)
                })
                .sum(),
            NoiseLaw::Samples { z, g, gbar } => {
                let comp = (1.0 - eta * eta).max(0.0).sqrt();
                let mut total = 0.0;
                for i in 0..z.len() {
                    let gt = eta * g[i] + comp * gbar[i];
                    total += f1(z[i] + alpha1 * g[i]) * f2(z[i] + alpha2 * gt);
                }
                total / z.len() as f64
            }
        }
    }

    fn expect_component(&self, sd: f64, breaks: &[f64], f: &impl Fn(f64) -> f64) -> f64 {
        let b: Vec<f64> = breaks.iter().map(|x| x / sd).collect();
        self.rule.expect(|u| f(sd * u), &b)
    }
}
