use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randmodel::dist::{NoiseDist, SignalDist};
use crate::seed::{derive_seed, rng};

/// Simulated regression data `y = X theta + eps` with `X_ij ~ N(0, 1/p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub theta_star: DVector<f64>,
    pub noise: DVector<f64>,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub signal_dist: SignalDist,
    pub noise_dist: NoiseDist,
}

/// JSON sidecar written next to a binary dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub signal: SignalDist,
    pub noise: NoiseDist,
    /// Little-endian f64 blocks in file order.
    pub layout: Vec<String>,
}

pub fn gen_data(n: usize, p: usize, signal: &SignalDist, noise: &NoiseDist, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(Error::Domain(format!("dimensions must be positive, got n = {n}, p = {p}")));
    }
    signal.validate()?;
    noise.validate()?;
    let mut r_theta = rng(derive_seed(seed, &[1]));
    let mut r_x = rng(derive_seed(seed, &[2]));
    let mut r_eps = rng(derive_seed(seed, &[3]));

    let theta_star = DVector::from_iterator(p, (0..p).map(|_| signal.sample(&mut r_theta)));
    let scale = 1.0 / (p as f64).sqrt();
    let row_major: Vec<f64> = (0..n * p).map(|_| scale * r_x.sample::<f64, _>(StandardNormal)).collect();
    let x = DMatrix::from_row_slice(n, p, &row_major);
    let eps = DVector::from_iterator(n, (0..n).map(|_| noise.sample(&mut r_eps)));
    let y = &x * &theta_star + &eps;
    Ok(Dataset { x, y, theta_star, noise: eps, n, p, seed, signal_dist: *signal, noise_dist: *noise })
}

impl Dataset {
    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            n: self.n,
            p: self.p,
            seed: self.seed,
            signal: self.signal_dist,
            noise: self.noise_dist,
            layout: vec!["X (n*p, row-major)".into(), "y (n)".into(), "theta (p)".into(), "noise (n)".into()],
        }
    }

    /// Writes `<stem>.bin` and `<stem>.json`.
    pub fn export(&self, bin_path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(bin_path)?);
        for i in 0..self.n {
            for j in 0..self.p {
                w.write_all(&self.x[(i, j)].to_le_bytes())?;
            }
        }
        for v in self.y.iter().chain(self.theta_star.iter()).chain(self.noise.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        std::fs::write(bin_path.with_extension("json"), meta)?;
        Ok(())
    }

    pub fn import(bin_path: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(bin_path.with_extension("json"))?)?;
        let (n, p) = (meta.n, meta.p);
        let mut r = BufReader::new(File::open(bin_path)?);
        let mut read = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; 8 * count];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let x = DMatrix::from_row_slice(n, p, &read(n * p)?);
        let y = DVector::from_vec(read(n)?);
        let theta_star = DVector::from_vec(read(p)?);
        let noise = DVector::from_vec(read(n)?);
        Ok(Dataset { x, y, theta_star, noise, n, p, seed: meta.seed, signal_dist: meta.signal, noise_dist: meta.noise })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIG: SignalDist = SignalDist::TwoPointSparse { strength: 2.0, support: 0.5 };
    const NOISE: NoiseDist = NoiseDist::Gaussian { sigma: 1.0 };

    #[test]
    fn deterministic() {
        let a = gen_data(30, 7, &SIG, &NOISE, 9).unwrap();
        let b = gen_data(30, 7, &SIG, &NOISE, 9).unwrap();
        assert_eq!(a, b);
        let c = gen_data(30, 7, &SIG, &NOISE, 10).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn response_is_exact() {
        let d = gen_data(20, 5, &SIG, &NOISE, 1).unwrap();
        assert_eq!(d.y, &d.x * &d.theta_star + &d.noise);
    }

    #[test]
    fn signal_second_moment() {
        let d = gen_data(1, 100_000, &SIG, &NOISE, 2).unwrap();
        let m2 = d.theta_star.norm_squared() / d.p as f64;
        assert!((m2 - 4.0).abs() < 0.1, "{m2}");
    }

    #[test]
    fn row_norms_near_one() {
        let d = gen_data(10_000, 100, &SIG, &NOISE, 3).unwrap();
        let mean = d.x.row_iter().map(|r| r.norm_squared()).sum::<f64>() / d.n as f64;
        assert!((mean - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(matches!(gen_data(0, 3, &SIG, &NOISE, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.bin");
        let d = gen_data(12, 4, &SIG, &NoiseDist::StudentT { dof: 2.0, scale: 1.0 }, 4).unwrap();
        d.export(&path).unwrap();
        assert_eq!(Dataset::import(&path).unwrap(), d);
    }
}
