//! Choosing the robustness radius.
//!
//! When an `ε` fraction of outliers sits at distance at least `D` from the
//! clean support `S`, the curve `h(δ) = (1-δ)·W_p^δ(μ̃,ν̃)^p` falls with
//! slope at most `-D^p` while outliers remain and at least `-diam(S)^p`
//! afterwards. [`elbow_detect`] locates that change of slope on a grid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{euclidean, DiscreteMeasure, Exponent, GroundCosts};
use crate::robust::{robust_wp_costs, RobustSolveConfig};

/// Allowed increase of the curve between grid points, relative to its scale.
pub const CURVE_TOLERANCE: f64 = 1e-9;

/// 26 points from 0 to 0.5.
pub fn default_grid() -> Vec<f64> {
    (0..=25).map(|k| k as f64 * 0.02).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ElbowReport {
    pub grid: Vec<f64>,
    pub curve: Vec<f64>,
    /// `slopes[k]` is the forward difference on `[grid[k], grid[k+1]]`.
    pub slopes: Vec<f64>,
    pub eps_hat: f64,
    pub slope_threshold: f64,
    /// The first interval is already flat: no contamination is resolvable.
    pub below_resolution: bool,
}

impl ElbowReport {
    /// Columns `delta,curve,slope`; the last row has an empty slope.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,curve,slope\n");
        for (k, (d, c)) in self.grid.iter().zip(&self.curve).enumerate() {
            match self.slopes.get(k) {
                Some(s) => out.push_str(&format!("{d},{c},{s}\n")),
                None => out.push_str(&format!("{d},{c},\n")),
            }
        }
        out
    }

    /// `{"epsHat", "threshold", "grid": [..], "belowResolution"}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "epsHat": self.eps_hat,
            "threshold": self.slope_threshold,
            "grid": self.grid,
            "belowResolution": self.below_resolution,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElbowConfig {
    pub p: f64,
    pub grid: Vec<f64>,
    /// Defaults to [`default_slope_threshold`].
    pub slope_threshold: Option<f64>,
    /// Worker threads for the curve solves; results are assembled in grid order.
    pub threads: usize,
}

impl ElbowConfig {
    pub fn new(p: f64) -> Self {
        ElbowConfig {
            p,
            grid: default_grid(),
            slope_threshold: None,
            threads: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        Exponent::finite(self.p)?;
        if self.grid.len() < 3 {
            return Err(Error::invalid("elbow grid needs at least 3 points"));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("elbow grid must be strictly increasing"));
        }
        if !(self.grid[0] >= 0.0) || !(self.grid[self.grid.len() - 1] < 1.0) {
            return Err(Error::invalid("elbow grid must lie in [0, 1)"));
        }
        if let Some(t) = self.slope_threshold {
            if !(t < 0.0) {
                return Err(Error::invalid("slope threshold must be negative"));
            }
        }
        if self.threads == 0 {
            return Err(Error::invalid("threads must be at least 1"));
        }
        Ok(())
    }
}

fn weighted_quantile(mut vals: Vec<(f64, f64)>, q: f64) -> f64 {
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = vals.iter().map(|v| v.1).sum();
    let mut acc = 0.0;
    for (x, w) in &vals {
        acc += w;
        if acc >= q * total {
            return *x;
        }
    }
    vals.last().map_or(0.0, |v| v.0)
}

/// `-sqrt(D̂^p · diam̂^p)`: the geometric mean of the two slope bounds.
///
/// `D̂` is the 99th percentile and `diam̂` the median of pairwise distances
/// in the pooled sample, each pair weighted by the product of its masses.
/// Large samples are thinned to about 2000 atoms first.
pub fn default_slope_threshold(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    let pooled = DiscreteMeasure::mixture(&[(0.5, mu), (0.5, nu)])?;
    let stride = pooled.len().div_ceil(2000).max(1);
    let idx: Vec<usize> = (0..pooled.len()).step_by(stride).collect();
    let mut pairs = Vec::with_capacity(idx.len() * idx.len() / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            pairs.push((
                euclidean(pooled.point(i), pooled.point(j)),
                pooled.weights()[i] * pooled.weights()[j],
            ));
        }
    }
    if pairs.is_empty() {
        return Ok(-1.0);
    }
    let far = weighted_quantile(pairs.clone(), 0.99);
    let typical = weighted_quantile(pairs, 0.5);
    let t = -(far.powf(p) * typical.powf(p)).sqrt();
    Ok(if t < 0.0 { t } else { -f64::MIN_POSITIVE })
}

/// Evaluates `(1-δ)·W_p^δ(μ̃,ν̃)^p` on the grid and locates the elbow.
///
/// `ε̂` is the midpoint of the first interval whose slope rises above the
/// threshold. If that is the very first interval, `ε̂ = 0` and the report is
/// flagged below resolution. If no interval rises above it, `ε̂` is the last
/// grid point.
pub fn elbow_detect(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cfg: &ElbowConfig) -> Result<ElbowReport> {
    cfg.validate()?;
    let p = cfg.p;
    let costs = GroundCosts::euclidean(mu, nu, Exponent::Finite(p))?;
    let solve = |delta: f64| -> Result<f64> {
        let plan = robust_wp_costs(mu.weights(), nu.weights(), &costs, &RobustSolveConfig::symmetric(p, delta)?)?;
        Ok((1.0 - delta) * plan.power)
    };
    let curve: Vec<f64> = if cfg.threads > 1 {
        let chunk = cfg.grid.len().div_ceil(cfg.threads);
        let parts: Vec<Result<Vec<f64>>> = std::thread::scope(|s| {
            let handles: Vec<_> = cfg
                .grid
                .chunks(chunk)
                .map(|ds| s.spawn(|| ds.iter().map(|&d| solve(d)).collect::<Result<Vec<f64>>>()))
                .collect();
            handles.into_iter().map(|h| h.join().expect("curve worker panicked")).collect()
        });
        let mut out = Vec::with_capacity(cfg.grid.len());
        for part in parts {
            out.extend(part?);
        }
        out
    } else {
        cfg.grid.iter().map(|&d| solve(d)).collect::<Result<_>>()?
    };

    let scale = curve[0].abs().max(1.0);
    for (k, w) in curve.windows(2).enumerate() {
        if w[1] > w[0] + CURVE_TOLERANCE * scale {
            return Err(Error::Internal(format!(
                "robust curve increases between δ = {} and δ = {}",
                cfg.grid[k],
                cfg.grid[k + 1]
            )));
        }
    }
    let slopes: Vec<f64> = (0..curve.len() - 1)
        .map(|k| (curve[k + 1] - curve[k]) / (cfg.grid[k + 1] - cfg.grid[k]))
        .collect();
    let threshold = match cfg.slope_threshold {
        Some(t) => t,
        None => default_slope_threshold(mu, nu, p)?,
    };
    let (eps_hat, below_resolution) = match slopes.iter().position(|&s| s > threshold) {
        Some(0) => (0.0, true),
        Some(k) => ((cfg.grid[k] + cfg.grid[k + 1]) / 2.0, false),
        None => (cfg.grid[cfg.grid.len() - 1], false),
    };
    Ok(ElbowReport {
        grid: cfg.grid.clone(),
        curve,
        slopes,
        eps_hat,
        slope_threshold: threshold,
        below_resolution,
    })
}

/// `ε_n = n^{-b}`, clamped to `[0, 0.49]`; intended for `0 < b < 1`.
pub fn consistency_schedule(n: u64, b: f64) -> f64 {
    (n.max(1) as f64).powf(-b).clamp(0.0, 0.49)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(consistency_schedule(1, 0.3), 0.49);
        assert!((consistency_schedule(10_000, 0.3) - 0.0630957).abs() < 1e-6);
        let mut prev = 1.0;
        for n in [2u64, 10, 100, 1000, 100_000] {
            let e = consistency_schedule(n, 0.3);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn clean_pair_is_below_resolution() {
        let mu = DiscreteMeasure::from_1d(&[0.0, 0.3, 1.0], vec![0.2, 0.5, 0.3]).unwrap();
        let rep = elbow_detect(&mu, &mu, &ElbowConfig::new(1.0)).unwrap();
        assert!(rep.curve.iter().all(|&c| c.abs() < 1e-15));
        assert_eq!(rep.eps_hat, 0.0);
        assert!(rep.below_resolution);
        assert_eq!(rep.to_csv().lines().count(), 27);
    }

    #[test]
    fn grid_validation() {
        let mu = DiscreteMeasure::from_1d(&[0.0], vec![1.0]).unwrap();
        let mut cfg = ElbowConfig::new(1.0);
        cfg.grid = vec![0.0, 0.1];
        assert!(elbow_detect(&mu, &mu, &cfg).is_err());
        cfg.grid = vec![0.0, 0.2, 0.1];
        assert!(elbow_detect(&mu, &mu, &cfg).is_err());
        cfg.grid = vec![0.0, 0.1, 0.2];
        cfg.slope_threshold = Some(1.0);
        assert!(elbow_detect(&mu, &mu, &cfg).is_err());
    }

    #[test]
    fn single_outlier_elbow() {
        // 10 clean atoms on [0, 1] in both; 10% outliers at +100 and -100
        let clean: Vec<f64> = (0..9).map(|k| k as f64 / 8.0).collect();
        let mut xs = clean.clone();
        xs.push(100.0);
        let mut ys = clean.clone();
        ys.push(-100.0);
        let mu = DiscreteMeasure::from_1d(&xs, vec![0.1; 10]).unwrap();
        let nu = DiscreteMeasure::from_1d(&ys, vec![0.1; 10]).unwrap();
        let mut cfg = ElbowConfig::new(1.0);
        cfg.threads = 3;
        let rep = elbow_detect(&mu, &nu, &cfg).unwrap();
        assert!((rep.eps_hat - 0.11).abs() < 1e-12, "{rep:?}");
        cfg.threads = 1;
        assert_eq!(elbow_detect(&mu, &nu, &cfg).unwrap(), rep);
    }
}
