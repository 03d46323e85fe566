//! Dual certificates for robust transport.
//!
//! A pair `(f, g)` with `f_i + g_j <= C_ij` certifies the lower bound
//!
//! ```text
//! (1-ε2)·Σ μ_i f_i + (1-ε1)·Σ ν_j g_j - ε1(1-ε2)·max f - ε2(1-ε1)·max g
//!     <= (1-ε1)(1-ε2)·W_p^{ε1,ε2}(μ,ν)^p.
//! ```
//!
//! With `ε1 = ε2 = ε` this is `(1-ε)` times `Σμf + Σνg - ε·Range(f)` where
//! `Range(f) = max f + max g` (the infimum of `f` is read as `-max g`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::Costs;
use crate::robust::{solve_coupling, CouplingSolution};

/// Feasibility and gap slack, relative to the largest cost entry.
pub const DUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DualCertificate {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `ε·Range(f)` in the symmetric case, `ε1(1-ε2)·max f + ε2(1-ε1)·max g` otherwise.
    pub penalty: f64,
    /// The primal quantity the certificate bounds: `(1-ε)·W^p`, or
    /// `(1-ε1)(1-ε2)·W^p` for unequal radii.
    pub primal_power: f64,
    /// `primal_power - objective`.
    pub gap: f64,
    #[serde(skip)]
    pub eps_mu: f64,
    #[serde(skip)]
    pub eps_nu: f64,
}

impl DualCertificate {
    pub fn objective(&self) -> f64 {
        self.primal_power - self.gap
    }

    /// Schema: `{"f": [..], "g": [..], "penalty", "primalPower", "gap"}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("certificate serializes")
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `g_j = min_i (C_ij - f_i)`.
pub fn c_transform<C: Costs>(f: &[f64], costs: &C) -> Vec<f64> {
    (0..costs.n_cols())
        .map(|j| {
            (0..costs.n_rows())
                .map(|i| costs.cost(i, j) - f[i])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `h_i = min_j (C_ij - g_j)`, the transform in the other direction.
pub fn c_transform_rows<C: Costs>(g: &[f64], costs: &C) -> Vec<f64> {
    (0..costs.n_rows())
        .map(|i| {
            (0..costs.n_cols())
                .map(|j| costs.cost(i, j) - g[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Penalty term for radii `(ε1, ε2)`.
pub fn penalty(f: &[f64], g: &[f64], eps_mu: f64, eps_nu: f64) -> f64 {
    if eps_mu == eps_nu {
        eps_mu * (max_of(f) + max_of(g))
    } else {
        eps_mu * (1.0 - eps_nu) * max_of(f) + eps_nu * (1.0 - eps_mu) * max_of(g)
    }
}

/// Dual objective of an explicit pair; see the module docs for the scaling.
pub fn pair_objective(f: &[f64], g: &[f64], mu: &[f64], nu: &[f64], eps_mu: f64, eps_nu: f64) -> f64 {
    let linear = if eps_mu == eps_nu {
        dot(mu, f) + dot(nu, g)
    } else {
        (1.0 - eps_nu) * dot(mu, f) + (1.0 - eps_mu) * dot(nu, g)
    };
    linear - penalty(f, g, eps_mu, eps_nu)
}

/// Asymmetric objective at `(f, f^c)`; never exceeds `(1-ε1)(1-ε2)·W^p`.
pub fn asymmetric_dual_value<C: Costs>(f: &[f64], costs: &C, mu: &[f64], nu: &[f64], eps_mu: f64, eps_nu: f64) -> f64 {
    let g = c_transform(f, costs);
    (1.0 - eps_nu) * dot(mu, f) + (1.0 - eps_mu) * dot(nu, &g)
        - eps_mu * (1.0 - eps_nu) * max_of(f)
        - eps_nu * (1.0 - eps_mu) * max_of(&g)
}

/// `min Σ w'_k h_k` over `0 <= w' <= w` with `Σ w' = 1 - eps`: the mass
/// sitting on the largest values of `h` is dropped. Returns the value, the
/// optimal `w'` and the cut level (largest kept value).
fn trim(h: &[f64], w: &[f64], eps: f64) -> (f64, Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by(|&a, &b| h[a].total_cmp(&h[b]).then(a.cmp(&b)));
    let mut left = 1.0 - eps;
    let mut kept = vec![0.0; h.len()];
    let mut value = 0.0;
    let mut level = order.first().map_or(0.0, |&k| h[k]);
    for &k in &order {
        if left <= 0.0 {
            break;
        }
        let take = w[k].min(left);
        kept[k] = take;
        value += take * h[k];
        left -= take;
        level = h[k];
    }
    (value, kept, level)
}

/// Loss-trimming objective for two uniform measures with `εn`, `εm` integral.
///
/// Drops the `εn` largest values of `f` and the `εm` largest values of `f^c`
/// and averages the rest. At an optimal potential this equals `W_p^ε(μ,ν)^p`.
pub fn trimmed_dual_value<C: Costs>(f: &[f64], costs: &C, mu: &[f64], nu: &[f64], eps: f64) -> Result<f64> {
    for (w, side) in [(mu, "mu"), (nu, "nu")] {
        let n = w.len() as f64;
        if w.iter().any(|&x| (x - 1.0 / n).abs() > 1e-12) {
            return Err(Error::invalid(format!("loss trimming needs a uniform {side}")));
        }
        let cut = eps * n;
        if (cut - cut.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!("ε·n = {cut} is not an integer on the {side} side")));
        }
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("radius {eps} not in [0, 1)")));
    }
    let g = c_transform(f, costs);
    let mean = |h: &[f64], w: &[f64]| {
        let n = w.len();
        let keep = n - (eps * n as f64).round() as usize;
        let mut v = h.to_vec();
        v.sort_by(f64::total_cmp);
        v[..keep].iter().sum::<f64>() / keep as f64
    };
    Ok(mean(f, mu) + mean(&g, nu))
}

/// Converts flow potentials of a coupling solve into a certificate.
///
/// Rows get `f_i = min(0, π_s - π_i)` and columns `g_j = min(T, π_j - π_s)`
/// with `T = π_t - π_s`. The pair is then shifted so that `max f = max g`,
/// which makes the penalty equal to `2ε·max f`.
pub fn dual_from_flow<C: Costs>(sol: &CouplingSolution, costs: &C, mu: &[f64], nu: &[f64]) -> Result<DualCertificate> {
    let fl = &sol.flow;
    let ps = fl.source_potential;
    let t = fl.sink_potential - ps;
    let mut f: Vec<f64> = fl.row_potentials.iter().map(|pi| (ps - pi).min(0.0)).collect();
    let mut g: Vec<f64> = fl.col_potentials.iter().map(|pj| (pj - ps).min(t)).collect();
    let shift = (max_of(&g) - max_of(&f)) / 2.0;
    f.iter_mut().for_each(|x| *x += shift);
    g.iter_mut().for_each(|x| *x -= shift);

    let (em, en) = (sol.plan.eps_mu, sol.plan.eps_nu);
    let scale = costs.max_cost().max(f64::MIN_POSITIVE);
    let mut worst: f64 = f64::NEG_INFINITY;
    for (i, fi) in f.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            worst = worst.max(fi + gj - costs.cost(i, j));
        }
    }
    if worst > DUAL_TOLERANCE * scale {
        return Err(Error::Internal(format!("flow potentials violate f + g <= C by {worst}")));
    }
    let primal_power = primal_scale(em, en) * sol.plan.power;
    let objective = pair_objective(&f, &g, mu, nu, em, en);
    let gap = primal_power - objective;
    if gap.abs() > DUAL_TOLERANCE * scale {
        return Err(Error::Internal(format!("duality gap {gap} exceeds tolerance")));
    }
    Ok(DualCertificate {
        penalty: penalty(&f, &g, em, en),
        f,
        g,
        primal_power,
        gap: gap.max(0.0),
        eps_mu: em,
        eps_nu: en,
    })
}

fn primal_scale(eps_mu: f64, eps_nu: f64) -> f64 {
    if eps_mu == eps_nu {
        1.0 - eps_mu
    } else {
        (1.0 - eps_mu) * (1.0 - eps_nu)
    }
}

/// Solves the coupling network and returns its certificate.
pub fn certify<C: Costs>(mu: &[f64], nu: &[f64], costs: &C, p: f64, eps_mu: f64, eps_nu: f64) -> Result<DualCertificate> {
    let sol = solve_coupling(mu, nu, costs, p, eps_mu, eps_nu)?;
    dual_from_flow(&sol, costs, mu, nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepSchedule {
    Constant(f64),
    /// `c / sqrt(t)` at iteration `t >= 1`.
    Diminishing(f64),
    /// Polyak steps toward a known optimal value (the flow-certified primal).
    Polyak,
    /// `c_k / sqrt(t - t_k)`: after `patience` iterations without a new best
    /// value the iterate jumps back to the best one and `c` is halved.
    Restarted { scale: f64, patience: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AscentConfig {
    pub max_iters: usize,
    pub step: StepSchedule,
    /// Stop once the relative gap to the certified primal falls below `tol`.
    pub tol: f64,
    /// Recorded with results; the ascent itself is deterministic.
    pub seed: u64,
}

impl AscentConfig {
    /// Restarted diminishing steps starting from `c = scale/10`.
    pub fn for_scale(scale: f64) -> Self {
        AscentConfig {
            max_iters: 100_000,
            step: StepSchedule::Restarted { scale: scale / 10.0, patience: 2_000 },
            tol: 1e-4,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        match self.step {
            StepSchedule::Constant(c) | StepSchedule::Diminishing(c) | StepSchedule::Restarted { scale: c, .. }
                if !(c > 0.0) =>
            {
                Err(Error::invalid("step size must be positive"))
            }
            StepSchedule::Restarted { patience: 0, .. } => Err(Error::invalid("patience must be at least 1")),
            _ => Ok(()),
        }
    }
}

/// Outcome of [`dual_ascent`]: the certificate of the best iterate and its trace.
#[derive(Debug, Clone)]
pub struct AscentReport {
    pub certificate: DualCertificate,
    pub iterations: usize,
    /// Best objective after each iteration (non-decreasing).
    pub best_trace: Vec<f64>,
}

/// Maximizes the trimmed dual `Φ(f) = (1-ε2)·T_{ε1}(f; μ) + (1-ε1)·T_{ε2}(f^c; ν)`
/// by projected-free subgradient ascent on tabular potentials.
///
/// `T_ε(h; w)` drops the `ε` mass of `w` sitting on the largest values of `h`.
/// Clipping `f` and `f^c` at their cut levels turns every iterate into a
/// feasible pair whose penalized objective equals `Φ(f)`, so each reported
/// value is a certified lower bound. The subgradient at `f_i` is the kept
/// mass of atom `i` minus the kept `ν` mass whose `c`-transform minimizer is
/// `i`; ties go to the lowest index.
pub fn dual_ascent<C: Costs>(
    mu: &[f64],
    nu: &[f64],
    costs: &C,
    p: f64,
    eps_mu: f64,
    eps_nu: f64,
    cfg: &AscentConfig,
) -> Result<AscentReport> {
    cfg.validate()?;
    let (n, m) = (mu.len(), nu.len());
    let reference = certify(mu, nu, costs, p, eps_mu, eps_nu)?;
    let target = reference.primal_power;
    let scale = costs.max_cost().max(f64::MIN_POSITIVE);
    let (wf, wg) = if eps_mu == eps_nu {
        (1.0, 1.0)
    } else {
        (1.0 - eps_nu, 1.0 - eps_mu)
    };

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut arg = vec![0usize; m];
    let mut best = f64::NEG_INFINITY;
    let mut best_f = f.clone();
    let mut trace = Vec::new();
    let mut grad = vec![0.0; n];
    let mut iterations = 0;
    let mut restart_scale = match cfg.step {
        StepSchedule::Restarted { scale, .. } => scale,
        _ => 0.0,
    };
    let (mut epoch_start, mut last_gain) = (0, 0);

    for t in 1..=cfg.max_iters {
        iterations = t;
        for j in 0..m {
            let (mut bv, mut bi) = (f64::INFINITY, 0);
            for (i, fi) in f.iter().enumerate() {
                let v = costs.cost(i, j) - fi;
                if v < bv {
                    bv = v;
                    bi = i;
                }
            }
            g[j] = bv;
            arg[j] = bi;
        }
        let (tf, kept_mu, _) = trim(&f, mu, eps_mu);
        let (tg, kept_nu, _) = trim(&g, nu, eps_nu);
        let phi = wf * tf + wg * tg;
        if !phi.is_finite() {
            return Err(Error::Numeric(format!("dual ascent objective became {phi} at iteration {t}")));
        }
        if phi > best {
            best = phi;
            best_f.copy_from_slice(&f);
            last_gain = t;
        }
        trace.push(best);
        if (target - best).abs() <= cfg.tol * target.abs().max(scale * 1e-12) {
            break;
        }

        for (gi, k) in grad.iter_mut().zip(&kept_mu) {
            *gi = wf * k;
        }
        for (j, k) in kept_nu.iter().enumerate() {
            grad[arg[j]] -= wg * k;
        }
        let norm2: f64 = grad.iter().map(|x| x * x).sum();
        if norm2 == 0.0 {
            break;
        }
        let step = match cfg.step {
            StepSchedule::Constant(c) => c / norm2.sqrt(),
            StepSchedule::Diminishing(c) => c / (t as f64).sqrt() / norm2.sqrt(),
            StepSchedule::Polyak => (target - phi).max(0.0) / norm2,
            StepSchedule::Restarted { patience, .. } => {
                if t - last_gain.max(epoch_start) >= patience {
                    restart_scale *= 0.5;
                    epoch_start = t;
                    f.copy_from_slice(&best_f);
                    continue;
                }
                restart_scale / ((t - epoch_start) as f64).sqrt() / norm2.sqrt()
            }
        };
        for (fi, gi) in f.iter_mut().zip(&grad) {
            *fi += step * gi;
        }
    }

    // clip the best iterate at its cut levels to obtain a feasible pair
    let g_best = c_transform(&best_f, costs);
    let (_, _, sf) = trim(&best_f, mu, eps_mu);
    let (_, _, sg) = trim(&g_best, nu, eps_nu);
    let fc: Vec<f64> = best_f.iter().map(|x| x.min(sf)).collect();
    let gc: Vec<f64> = g_best.iter().map(|x| x.min(sg)).collect();
    let objective = pair_objective(&fc, &gc, mu, nu, eps_mu, eps_nu);
    Ok(AscentReport {
        certificate: DualCertificate {
            penalty: penalty(&fc, &gc, eps_mu, eps_nu),
            f: fc,
            g: gc,
            primal_power: target,
            gap: target - objective,
            eps_mu,
            eps_nu,
        },
        iterations,
        best_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::CostMatrix;

    #[test]
    fn c_transform_examples() {
        let c = CostMatrix::from_rows(vec![vec![2.0, 3.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(c_transform(&[0.0, 0.0], &c), vec![1.0, 2.0]);
        let single = CostMatrix::from_rows(vec![vec![4.0, 6.0]]).unwrap();
        assert_eq!(c_transform(&[1.5], &single), vec![2.5, 4.5]);
    }

    #[test]
    fn trim_drops_top_mass() {
        let (v, kept, level) = trim(&[3.0, 1.0, 2.0, 5.0], &[0.25; 4], 0.5);
        assert!((v - 0.75).abs() < 1e-15);
        assert_eq!(kept, vec![0.0, 0.25, 0.25, 0.0]);
        assert_eq!(level, 2.0);
    }

    #[test]
    fn two_point_certificate() {
        // {0,1} vs {2,3}, p = 1, ε = 1/2: (1-ε)·1 = 0.5
        let c = CostMatrix::from_rows(vec![vec![2.0, 3.0], vec![1.0, 2.0]]).unwrap();
        let cert = certify(&[0.5, 0.5], &[0.5, 0.5], &c, 1.0, 0.5, 0.5).unwrap();
        assert!((cert.primal_power - 0.5).abs() < 1e-12);
        assert!(cert.gap <= 1e-12);
        assert!((cert.penalty - 2.0 * 0.5 * max_of(&cert.f)).abs() < 1e-12);
        let js = cert.to_json();
        for key in ["f", "g", "penalty", "primalPower", "gap"] {
            assert!(js.get(key).is_some());
        }
    }

    #[test]
    fn identical_measures_certify_zero() {
        let c = CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let cert = certify(&[0.5, 0.5], &[0.5, 0.5], &c, 1.0, 0.2, 0.2).unwrap();
        assert!(cert.primal_power.abs() < 1e-15);
        assert!(cert.gap.abs() < 1e-12);
    }

    #[test]
    fn trimming_rejects_bad_inputs() {
        let c = CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(trimmed_dual_value(&[0.0, 0.0], &c, &[0.5, 0.5], &[0.5, 0.5], 0.25).is_err());
        assert!(trimmed_dual_value(&[0.0, 0.0], &c, &[0.3, 0.7], &[0.5, 0.5], 0.5).is_err());
        let v = trimmed_dual_value(&[0.0, 0.0], &c, &[0.5, 0.5], &[0.5, 0.5], 0.5).unwrap();
        assert_eq!(v, 0.0);
    }
}
