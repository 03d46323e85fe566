//! Checked-in calibration constants and the contaminated fixture builders.

use rand::Rng;
use serde::{Deserialize, Serialize};

use robust_ot::sampling::rng;
use robust_ot::{huber_mix, ContaminationSpec, DiscreteMeasure};

use crate::error::Result;
use crate::stats::trial_seed;

const CALIBRATION_JSON: &str = include_str!("../fixtures/calibration.json");

/// Frozen constant of the risk bound and the setting it was fitted in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RiskCalibration {
    pub constant: f64,
    /// Multiplier applied to the largest constant seen on the calibration seeds.
    pub safety_factor: f64,
    pub calibration_seeds: Vec<u64>,
    pub eps: f64,
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub d: usize,
    pub shift: f64,
    /// Clean samples are `N(0, core_scale²)` with probability `1 - tail_weight`
    /// and `N(0, tail_scale²)` otherwise.
    pub core_scale: f64,
    pub tail_scale: f64,
    pub tail_weight: f64,
    pub outlier_distance: f64,
    /// Outlier distance of the second arm, where trimming cannot isolate the outliers.
    pub near_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Calibration {
    pub risk_sandwich: RiskCalibration,
}

pub fn calibration() -> Calibration {
    serde_json::from_str(CALIBRATION_JSON).expect("checked-in calibration file parses")
}

/// Clean measures on a set of diameter one and their Huber contaminations.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedPair {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub mu_tilde: DiscreteMeasure,
    pub nu_tilde: DiscreteMeasure,
    /// Diameter of the pooled clean support.
    pub diam: f64,
    /// Smallest of the outlier-to-support and outlier-to-outlier distances.
    pub outlier_gap: f64,
}

impl ContaminatedPair {
    pub fn separation_ratio(&self) -> f64 {
        self.outlier_gap / self.diam
    }
}

fn min_dist(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mut best = f64::INFINITY;
    for x in a.points() {
        for y in b.points() {
            best = best.min(robust_ot::measure::euclidean(x, y));
        }
    }
    best
}

fn contaminate(mu: DiscreteMeasure, nu: DiscreteMeasure, alpha: DiscreteMeasure, beta: DiscreteMeasure, eps: f64, seed: u64) -> Result<ContaminatedPair> {
    let pooled = DiscreteMeasure::mixture(&[(0.5, &mu), (0.5, &nu)])?;
    let outlier_gap = min_dist(&alpha, &pooled).min(min_dist(&beta, &pooled)).min(min_dist(&alpha, &beta));
    let mu_tilde = huber_mix(&ContaminationSpec { base: mu.clone(), outlier: alpha, level: eps, seed })?;
    let nu_tilde = huber_mix(&ContaminationSpec { base: nu.clone(), outlier: beta, level: eps, seed })?;
    Ok(ContaminatedPair {
        diam: pooled.diameter(),
        mu,
        nu,
        mu_tilde,
        nu_tilde,
        outlier_gap,
    })
}

/// Planar fixture: `n` uniform atoms per side in a disc of diameter one, and
/// two-atom outlier clusters on opposite sides placed so that every outlier
/// distance is `separation` times the clean diameter plus a small margin.
pub fn recovery_fixture(seed: u64, n: usize, separation: f64, eps: f64) -> Result<ContaminatedPair> {
    let disc = |stream: u64| -> Result<DiscreteMeasure> {
        let mut r = rng(trial_seed(seed, n, stream));
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let (x, y) = (r.random::<f64>() - 0.5, r.random::<f64>() - 0.5);
            if x * x + y * y <= 0.25 {
                pts.push(vec![x, y]);
            }
        }
        Ok(DiscreteMeasure::uniform(pts)?)
    };
    let mu = disc(0)?;
    let nu = disc(1)?;
    let pooled = DiscreteMeasure::mixture(&[(0.5, &mu), (0.5, &nu)])?;
    let diam = pooled.diameter();
    // clusters of radius 0.05 centred at ±L; the clean atoms lie within 0.5 of the origin
    let l = 0.55 + separation * diam + 1e-3;
    let mut r = rng(trial_seed(seed, n, 2));
    let mut cluster = |sign: f64| -> Result<DiscreteMeasure> {
        let pts: Vec<Vec<f64>> = (0..2)
            .map(|_| vec![sign * l + 0.05 * (r.random::<f64>() - 0.5), 0.05 * (r.random::<f64>() - 0.5)])
            .collect();
        Ok(DiscreteMeasure::uniform(pts)?)
    };
    let alpha = cluster(1.0)?;
    let beta = cluster(-1.0)?;
    contaminate(mu, nu, alpha, beta, eps, seed)
}

/// Line fixture: clean atoms in `[0, 1]` on both sides (endpoints included,
/// so the clean diameter is exactly one), one outlier at `1 + distance` for
/// `μ` and one at `-distance` for `ν`.
pub fn elbow_fixture(seed: u64, n: usize, eps: f64, distance: f64) -> Result<ContaminatedPair> {
    let line = |stream: u64| -> Result<DiscreteMeasure> {
        let mut r = rng(trial_seed(seed, n, stream));
        let mut xs = vec![0.0, 1.0];
        xs.extend((2..n.max(2)).map(|_| r.random::<f64>()));
        Ok(DiscreteMeasure::uniform(xs.into_iter().map(|x| vec![x]).collect())?)
    };
    let alpha = DiscreteMeasure::dirac(vec![1.0 + distance])?;
    let beta = DiscreteMeasure::dirac(vec![-distance])?;
    contaminate(line(0)?, line(1)?, alpha, beta, eps, seed)
}
