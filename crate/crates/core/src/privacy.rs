//! The robust Wasserstein mechanism for Pufferfish privacy.
//!
//! For every pair of secrets `(S, T)` the mechanism computes the robust
//! bottleneck distance `W_∞^δ` between the conditional distributions of the
//! released statistic. It then adds Laplace noise with scale
//! `W_δ / ε_priv`, where `W_δ` is the largest of these distances.
//!
//! The Laplace sampler is a seeded inverse-CDF transform of ChaCha8 output.
//! It is meant for reproducible experiments. It is not a hardened sampler
//! and must not be used to protect real data.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::robust::robust_winf;
use crate::sampling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SecretPair {
    pub label_s: String,
    pub label_t: String,
    pub dist_s: DiscreteMeasure,
    pub dist_t: DiscreteMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PufferfishFramework {
    pub pairs: Vec<SecretPair>,
    pub eps_priv: f64,
    pub delta_priv: f64,
}

impl PufferfishFramework {
    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::invalid("framework has no secret pairs"));
        }
        if !(self.eps_priv > 0.0) || !self.eps_priv.is_finite() {
            return Err(Error::invalid("epsPriv must be positive"));
        }
        if !(0.0..=0.5).contains(&self.delta_priv) {
            return Err(Error::invalid("deltaPriv must lie in [0, 1/2]"));
        }
        for pair in &self.pairs {
            if pair.dist_s.dim() != 1 || pair.dist_t.dim() != 1 {
                return Err(Error::invalid(format!(
                    "pair ({}, {}): conditional distributions must be one-dimensional",
                    pair.label_s, pair.label_t
                )));
            }
        }
        Ok(())
    }

    /// Schema: `{"pairs": [{"labelS", "labelT", "distS": {"points", "weights"},
    /// "distT": {..}}], "epsPriv", "deltaPriv"}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let fw: PufferfishFramework = serde_json::from_str(s)?;
        fw.validate()?;
        Ok(fw)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("framework serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MechanismReport {
    pub per_pair_winf: Vec<f64>,
    pub w_delta: f64,
    pub noise_scale: f64,
    pub eps_priv: f64,
    pub delta_priv: f64,
    /// Seed of the last release made from this report, if any.
    pub sample_seed: Option<u64>,
}

/// Computes `W_δ` over all secret pairs and the Laplace scale `W_δ/ε_priv`.
pub fn mechanism_calibrate(fw: &PufferfishFramework) -> Result<MechanismReport> {
    fw.validate()?;
    let per_pair_winf = std::thread::scope(|s| {
        let handles: Vec<_> = fw
            .pairs
            .iter()
            .map(|pair| s.spawn(move || robust_winf(&pair.dist_s, &pair.dist_t, fw.delta_priv).map(|(v, _)| v)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("calibration worker panicked"))
            .collect::<Result<Vec<f64>>>()
    })?;
    let w_delta = per_pair_winf.iter().copied().fold(0.0, f64::max);
    Ok(MechanismReport {
        per_pair_winf,
        w_delta,
        noise_scale: w_delta / fw.eps_priv,
        eps_priv: fw.eps_priv,
        delta_priv: fw.delta_priv,
        sample_seed: None,
    })
}

/// One draw from `Laplace(0, scale)`: with `U ~ Unif[-1/2, 1/2)`,
/// `X = -scale·sign(U)·ln(1 - 2|U|)`.
pub fn laplace_sample<R: Rng>(scale: f64, rng: &mut R) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    loop {
        let u = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * tail.ln();
        }
    }
}

pub fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

/// `value + Z` with `Z ~ Laplace(0, noise_scale)` drawn from the seeded stream.
pub fn mechanism_release(value: f64, report: &MechanismReport, seed: u64) -> f64 {
    value + laplace_sample(report.noise_scale, &mut sampling::rng(seed))
}

/// `count` releases from one seeded stream.
pub fn mechanism_release_many(value: f64, report: &MechanismReport, seed: u64, count: usize) -> Vec<f64> {
    let mut r = sampling::rng(seed);
    (0..count)
        .map(|_| value + laplace_sample(report.noise_scale, &mut r))
        .collect()
}

/// A coupling of `μ` and `ν` moving at most `2δ` of its mass farther than
/// `t = W_∞^δ(μ, ν)`.
///
/// With `π_g` the unit flow at threshold `t`, the coupling is
/// `(1-δ)·π_g + r_μ ⊗ r_ν / δ`, where `r_μ`, `r_ν` are the masses `π_g`
/// leaves unmatched. Only the product part can exceed `t`, and it has mass `δ`.
pub fn coupling_witness(mu: &DiscreteMeasure, nu: &DiscreteMeasure, delta: f64) -> Result<(f64, Vec<(usize, usize, f64)>)> {
    let (t, plan) = robust_winf(mu, nu, delta)?;
    let (n, m) = (mu.len(), nu.len());
    let mut dense = vec![0.0; n * m];
    for &(i, j, f) in &plan.coupling {
        dense[i * m + j] += (1.0 - delta) * f;
    }
    let total_r: f64 = plan.removed_mu.iter().sum();
    if total_r > 0.0 {
        for (i, ri) in plan.removed_mu.iter().enumerate() {
            for (j, rj) in plan.removed_nu.iter().enumerate() {
                dense[i * m + j] += ri * rj / total_r;
            }
        }
    }
    let coupling = dense
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(k, &v)| (k / m, k % m, v))
        .collect();
    Ok((t, coupling))
}

/// Convolution of two probability vectors on the integer grid; entries
/// below `prune` are dropped and the result is renormalized.
pub fn convolve(a: &[f64], b: &[f64], prune: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out.iter_mut().for_each(|v| {
        if *v < prune {
            *v = 0.0
        }
    });
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

fn power(pmf: &[f64], k: usize, prune: f64) -> Vec<f64> {
    let mut acc = vec![1.0];
    for _ in 0..k {
        acc = convolve(&acc, pmf, prune);
    }
    acc
}

fn grid_measure(pmf: &[f64], unit: f64) -> Result<DiscreteMeasure> {
    let (pts, ws): (Vec<f64>, Vec<f64>) = pmf
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, &w)| (k as f64 * unit, w))
        .unzip();
    DiscreteMeasure::from_1d(&pts, ws)
}

/// Parameters of the income example: the released statistic is the total
/// income of `customers` people, and the secret is whether `switched` of
/// them are of type B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IncomeExample {
    /// Income granularity in dollars.
    pub unit: f64,
    /// Type A income is uniform on `0..typical_units`.
    pub typical_units: usize,
    /// A type B customer who is not a millionaire earns uniformly on `b_low..typical_units`.
    pub b_low: usize,
    /// Millionaire incomes are uniform on `rich_low..=rich_high` units.
    pub rich_low: usize,
    pub rich_high: usize,
    /// Probability that a type B customer is a millionaire.
    pub millionaire_prob: f64,
    pub customers: usize,
    pub switched: usize,
    pub prune: f64,
}

impl Default for IncomeExample {
    fn default() -> Self {
        IncomeExample {
            unit: 10_000.0,
            typical_units: 10,
            b_low: 5,
            rich_low: 100,
            rich_high: 200,
            millionaire_prob: 1e-4,
            customers: 100,
            switched: 10,
            prune: 1e-15,
        }
    }
}

impl IncomeExample {
    pub fn framework(&self, eps_priv: f64, delta_priv: f64) -> Result<PufferfishFramework> {
        if self.switched > self.customers
            || self.b_low >= self.typical_units
            || self.typical_units > self.rich_low
            || self.rich_low > self.rich_high
        {
            return Err(Error::invalid("inconsistent income example parameters"));
        }
        if !(0.0..=1.0).contains(&self.millionaire_prob) {
            return Err(Error::invalid("millionaire probability must lie in [0, 1]"));
        }
        let a: Vec<f64> = vec![1.0 / self.typical_units as f64; self.typical_units];
        let mut b = vec![0.0; self.rich_high + 1];
        let ordinary = (self.typical_units - self.b_low) as f64;
        for v in &mut b[self.b_low..self.typical_units] {
            *v = (1.0 - self.millionaire_prob) / ordinary;
        }
        let rich = (self.rich_high - self.rich_low + 1) as f64;
        for v in &mut b[self.rich_low..=self.rich_high] {
            *v += self.millionaire_prob / rich;
        }
        let base = power(&a, self.customers - self.switched, self.prune);
        let all_a = convolve(&base, &power(&a, self.switched, self.prune), self.prune);
        let mixed = convolve(&base, &power(&b, self.switched, self.prune), self.prune);
        let fw = PufferfishFramework {
            pairs: vec![SecretPair {
                label_s: format!("all {} customers type A", self.customers),
                label_t: format!("{} of {} customers type B", self.switched, self.customers),
                dist_s: grid_measure(&all_a, self.unit)?,
                dist_t: grid_measure(&mixed, self.unit)?,
            }],
            eps_priv,
            delta_priv,
        };
        fw.validate()?;
        Ok(fw)
    }
}
