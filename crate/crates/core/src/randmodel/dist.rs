use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::randmodel::quadrature::GaussHermite;

/// Law of the signal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalDist {
    /// `strength / sqrt(support)` with probability `support`, else zero.
    TwoPointSparse { strength: f64, support: f64 },
    /// `N(0, variance)` with probability `eps`, else zero.
    GaussPointMass { eps: f64, variance: f64 },
    PointMass { value: f64 },
}

/// Law of the additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseDist {
    Gaussian { sigma: f64 },
    /// `scale * T` with `T` Student-t on `dof` degrees of freedom.
    StudentT { dof: f64, scale: f64 },
}

impl SignalDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SignalDist::TwoPointSparse { strength, support } => {
                strength.is_finite() && strength != 0.0 && support > 0.0 && support <= 1.0
            }
            SignalDist::GaussPointMass { eps, variance } => eps > 0.0 && eps <= 1.0 && variance > 0.0 && variance.is_finite(),
            SignalDist::PointMass { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid signal law {self:?}")))
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            SignalDist::TwoPointSparse { strength, .. } => strength * strength,
            SignalDist::GaussPointMass { eps, variance } => eps * variance,
            SignalDist::PointMass { value } => value * value,
        }
    }

    /// True for the zero law, which makes the error-free fit exact.
    pub fn is_zero(&self) -> bool {
        matches!(*self, SignalDist::PointMass { value } if value == 0.0)
    }

    /// Weighted atoms; a Gaussian component is expanded on the Hermite nodes.
    pub fn atoms(&self, hermite: &GaussHermite) -> Vec<(f64, f64)> {
        match *self {
            SignalDist::TwoPointSparse { strength, support } => {
                let big = strength / support.sqrt();
                if support >= 1.0 {
                    vec![(big, 1.0)]
                } else {
                    vec![(0.0, 1.0 - support), (big, support)]
                }
            }
            SignalDist::GaussPointMass { eps, variance } => {
                let sd = variance.sqrt();
                let mut atoms = Vec::with_capacity(hermite.nodes.len() + 1);
                if eps < 1.0 {
                    atoms.push((0.0, 1.0 - eps));
                }
                atoms.extend(hermite.nodes.iter().zip(&hermite.weights).map(|(&x, &w)| (sd * x, eps * w)));
                atoms
            }
            SignalDist::PointMass { value } => vec![(value, 1.0)],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SignalDist::TwoPointSparse { strength, support } => {
                if rng.random::<f64>() < support {
                    strength / support.sqrt()
                } else {
                    0.0
                }
            }
            SignalDist::GaussPointMass { eps, variance } => {
                let hit = rng.random::<f64>() < eps;
                let z: f64 = rng.sample(StandardNormal);
                if hit {
                    variance.sqrt() * z
                } else {
                    0.0
                }
            }
            SignalDist::PointMass { value } => value,
        }
    }
}

impl NoiseDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseDist::Gaussian { sigma } => sigma >= 0.0 && sigma.is_finite(),
            NoiseDist::StudentT { dof, scale } => dof >= 2.0 && dof.is_finite() && scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid noise law {self:?}")))
        }
    }

    /// Second moment; infinite for Student-t with `dof <= 2`.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseDist::Gaussian { sigma } => sigma * sigma,
            NoiseDist::StudentT { dof, scale } => {
                if dof > 2.0 {
                    scale * scale * dof / (dof - 2.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn is_heavy_tailed(&self) -> bool {
        matches!(self, NoiseDist::StudentT { .. })
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, NoiseDist::Gaussian { sigma } if sigma == 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseDist::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseDist::StudentT { dof, scale } => scale * student_t_quantile(dof, open_unit(rng)),
        }
    }
}

/// Uniform draw in the open interval `(0, 1)`.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Student-t quantile; closed form on two degrees of freedom.
pub fn student_t_quantile(dof: f64, u: f64) -> f64 {
    if dof == 2.0 {
        (2.0 * u - 1.0) / (2.0 * u * (1.0 - u)).sqrt()
    } else {
        StudentsT::new(0.0, 1.0, dof).expect("dof validated").inverse_cdf(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;

    #[test]
    fn two_point_moment() {
        let d = SignalDist::TwoPointSparse { strength: 2.0, support: 0.5 };
        assert_eq!(d.second_moment(), 4.0);
        let atoms = d.atoms(&GaussHermite::new(8));
        let m2: f64 = atoms.iter().map(|(x, w)| w * x * x).sum();
        assert!((m2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_point_mass_atoms_carry_moment() {
        let d = SignalDist::GaussPointMass { eps: 0.1, variance: 3.0 };
        let atoms = d.atoms(&GaussHermite::new(32));
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let m2: f64 = atoms.iter().map(|(x, w)| w * x * x).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((m2 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn student_quantile_matches_statrs() {
        let t = StudentsT::new(0.0, 1.0, 2.0).unwrap();
        for u in [0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((student_t_quantile(2.0, u) - t.inverse_cdf(u)).abs() < 1e-8);
        }
    }

    #[test]
    fn student_samples_have_right_median_spread() {
        let noise = NoiseDist::StudentT { dof: 3.0, scale: 2.0 };
        let mut r = rng(5);
        let mut xs: Vec<f64> = (0..20_000).map(|_| noise.sample(&mut r)).collect();
        xs.sort_by(f64::total_cmp);
        // upper quartile of t_3 is 0.7649
        let q3 = xs[15_000];
        assert!((q3 - 2.0 * 0.764_892).abs() < 0.05, "{q3}");
    }
}
