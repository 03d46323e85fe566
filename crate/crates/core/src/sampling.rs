//! Seeded empirical-measure generators.
//!
//! Every sampler draws from ChaCha8 (`rand_chacha::ChaCha8Rng`), a
//! counter-based stream cipher generator whose output is fixed by its seed on
//! every platform. Samples are returned as empirical measures with weight
//! `1/n` per draw (coincident draws merge).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    Ok(())
}

/// `n` draws of `mean + scale·N(0, I_d)`.
pub fn gaussian(n: usize, d: usize, mean: f64, scale: f64, seed: u64) -> Result<DiscreteMeasure> {
    check_n(n)?;
    let mut r = rng(seed);
    let pts = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| mean + scale * r.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    DiscreteMeasure::uniform(pts)
}

/// `n` draws from `Unif([0, 1]^d)`.
pub fn uniform_cube(n: usize, d: usize, seed: u64) -> Result<DiscreteMeasure> {
    check_n(n)?;
    let mut r = rng(seed);
    let pts = (0..n)
        .map(|_| (0..d).map(|_| r.random::<f64>()).collect())
        .collect();
    DiscreteMeasure::uniform(pts)
}

/// `n` draws from `Exp(rate)` by inverse CDF: `-ln(1 - U) / rate`.
pub fn exponential_1d(n: usize, rate: f64, seed: u64) -> Result<DiscreteMeasure> {
    check_n(n)?;
    if !(rate > 0.0) {
        return Err(Error::invalid("exponential rate must be positive"));
    }
    let mut r = rng(seed);
    let pts = (0..n)
        .map(|_| vec![-(1.0 - r.random::<f64>()).ln() / rate])
        .collect();
    DiscreteMeasure::uniform(pts)
}

/// Loads a point cloud (JSON or CSV measure file).
pub fn point_cloud_from_file(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    DiscreteMeasure::read(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights_and_determinism() {
        let a = uniform_cube(3, 1, 7).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.weights().iter().all(|w| (*w - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(a, uniform_cube(3, 1, 7).unwrap());
        assert_ne!(a, uniform_cube(3, 1, 8).unwrap());
        assert!(uniform_cube(0, 1, 7).is_err());
    }

    #[test]
    fn exponential_mean_band() {
        // mean 1/λ, sd 1/λ: 3σ/√n band
        let (n, rate) = (20_000usize, 2.0);
        let m = exponential_1d(n, rate, 11).unwrap();
        let mean: f64 = m.points().zip(m.weights()).map(|(p, w)| p[0] * w).sum();
        let band = 3.0 * (1.0 / rate) / (n as f64).sqrt();
        assert!((mean - 1.0 / rate).abs() <= band, "mean {mean}");
    }

    #[test]
    fn gaussian_covariance_trace() {
        // trace of the empirical covariance of N(0, I_d) concentrates at d;
        // the per-coordinate variance estimate has sd ≈ sqrt(2/n)
        let (n, d) = (20_000usize, 4usize);
        let m = gaussian(n, d, 0.0, 1.0, 5).unwrap();
        let mut mean = vec![0.0; d];
        for (p, w) in m.points().zip(m.weights()) {
            for k in 0..d {
                mean[k] += w * p[k];
            }
        }
        let mut trace = 0.0;
        for (p, w) in m.points().zip(m.weights()) {
            for k in 0..d {
                trace += w * (p[k] - mean[k]).powi(2);
            }
        }
        let band = 4.0 * (2.0 * d as f64 / n as f64).sqrt();
        assert!((trace - d as f64).abs() <= band, "trace {trace}");
    }
}
