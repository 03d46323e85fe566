//! Primal robust transport distances.
//!
//! Every finite-`p` solve reduces to one transportation network. Row `i`
//! may ship at most `μ_i/(1-εμ)`, column `j` may receive at most
//! `ν_j/(1-εν)`, and exactly one unit of flow is routed. The optimal flow is
//! the robust coupling and its cost is `W_p^{εμ,εν}(μ,ν)^p`. The mass removed
//! from atom `i` is `μ_i - (1-εμ)·(row sum)_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, EdgeMask, FlowSolution, FlowStatus, TransportNetwork};
use crate::measure::{Costs, DiscreteMeasure, Exponent, GroundCosts};

/// Slack allowed on marginal constraints of a returned plan.
pub const PLAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    /// Remove `ε` mass from each side, rescale, transport.
    MassRemoval,
    /// Add mass in Huber balls of radius `ε/(1+ε)`. Value only.
    MassAddition,
    /// Couplings with marginals dominated by `μ/(1-εμ)` and `ν/(1-εν)`.
    CouplingPrimal,
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "massremoval" | "removal" => Ok(Formulation::MassRemoval),
            "massaddition" | "addition" => Ok(Formulation::MassAddition),
            "couplingprimal" | "coupling" => Ok(Formulation::CouplingPrimal),
            _ => Err(Error::invalid(format!("unknown formulation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustSolveConfig {
    pub p: Exponent,
    pub eps_mu: f64,
    pub eps_nu: f64,
    pub formulation: Formulation,
}

impl RobustSolveConfig {
    pub fn symmetric(p: f64, eps: f64) -> Result<Self> {
        Self::asymmetric(p, eps, eps)
    }

    pub fn asymmetric(p: f64, eps_mu: f64, eps_nu: f64) -> Result<Self> {
        let cfg = RobustSolveConfig {
            p: Exponent::finite(p)?,
            eps_mu,
            eps_nu,
            formulation: Formulation::CouplingPrimal,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn one_sided(p: f64, eps: f64) -> Result<Self> {
        Self::asymmetric(p, eps, 0.0)
    }

    pub fn with_formulation(mut self, formulation: Formulation) -> Self {
        self.formulation = formulation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps_mu)?;
        check_eps(self.eps_nu)?;
        if let Exponent::Finite(p) = self.p {
            Exponent::finite(p)?;
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.eps_mu == self.eps_nu
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("robustness radius {eps} not in [0, 1)")));
    }
    Ok(())
}

fn finite_p(p: Exponent) -> Result<f64> {
    p.as_finite()
        .ok_or_else(|| Error::invalid("this solver needs a finite exponent; use robust_winf for p = inf"))
}

/// Optimal robust coupling together with the trimmed measures.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustPlan {
    /// `(i, j, mass)` with positive mass, sorted by `(i, j)`; total mass 1.
    pub coupling: Vec<(usize, usize, f64)>,
    pub kept_mu: Vec<f64>,
    pub kept_nu: Vec<f64>,
    pub removed_mu: Vec<f64>,
    pub removed_nu: Vec<f64>,
    /// The distance, in units of the ground metric.
    pub value: f64,
    /// `Σ coupling_ij·C_ij`, the `p`-th power of `value` (equal to `value` when `p = ∞`).
    pub power: f64,
    pub p: Exponent,
    pub eps_mu: f64,
    pub eps_nu: f64,
}

impl RobustPlan {
    fn from_coupling(
        coupling: Vec<(usize, usize, f64)>,
        mu: &[f64],
        nu: &[f64],
        eps_mu: f64,
        eps_nu: f64,
        power: f64,
        p: Exponent,
    ) -> Self {
        let (kept_mu, removed_mu) = split(mu, &coupling, eps_mu, |e| e.0);
        let (kept_nu, removed_nu) = split(nu, &coupling, eps_nu, |e| e.1);
        let value = match p {
            Exponent::Finite(q) => power.max(0.0).powf(1.0 / q),
            Exponent::Infinity => power,
        };
        RobustPlan {
            coupling,
            kept_mu,
            kept_nu,
            removed_mu,
            removed_nu,
            value,
            power,
            p,
            eps_mu,
            eps_nu,
        }
    }

    /// Checks the marginal invariants, returning an internal error on failure.
    pub fn verify(&self, mu: &[f64], nu: &[f64]) -> Result<()> {
        let total: f64 = self.coupling.iter().map(|e| e.2).sum();
        if (total - 1.0).abs() > PLAN_TOLERANCE {
            return Err(Error::Internal(format!("coupling mass {total} is not 1")));
        }
        for (side, w, kept, removed, eps) in [
            ("mu", mu, &self.kept_mu, &self.removed_mu, self.eps_mu),
            ("nu", nu, &self.kept_nu, &self.removed_nu, self.eps_nu),
        ] {
            if removed.iter().any(|&r| r < -PLAN_TOLERANCE) {
                return Err(Error::Internal(format!("negative removal on the {side} side")));
            }
            let rem: f64 = removed.iter().sum();
            if (rem - eps).abs() > PLAN_TOLERANCE {
                return Err(Error::Internal(format!("{side} side removes {rem}, expected {eps}")));
            }
            for ((k, r), wi) in kept.iter().zip(removed).zip(w) {
                if (k + r - wi).abs() > PLAN_TOLERANCE {
                    return Err(Error::Internal(format!("{side} side kept + removed != weight")));
                }
            }
        }
        Ok(())
    }

    /// Schema: `{"value", "p", "epsMu", "epsNu", "coupling": [[i, j, mass], ..],
    /// "removedMu": [..], "removedNu": [..], "keptMu": [..], "keptNu": [..]}`.
    /// `p` is a number or the string `"inf"`.
    pub fn to_json(&self) -> serde_json::Value {
        let p = match self.p {
            Exponent::Finite(q) => serde_json::json!(q),
            Exponent::Infinity => serde_json::json!("inf"),
        };
        serde_json::json!({
            "value": self.value,
            "p": p,
            "epsMu": self.eps_mu,
            "epsNu": self.eps_nu,
            "coupling": self.coupling.iter().map(|&(i, j, m)| serde_json::json!([i, j, m])).collect::<Vec<_>>(),
            "removedMu": self.removed_mu,
            "removedNu": self.removed_nu,
            "keptMu": self.kept_mu,
            "keptNu": self.kept_nu,
        })
    }
}

fn split(
    w: &[f64],
    coupling: &[(usize, usize, f64)],
    eps: f64,
    key: impl Fn(&(usize, usize, f64)) -> usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut sums = vec![0.0; w.len()];
    for e in coupling {
        sums[key(e)] += e.2;
    }
    let kept: Vec<f64> = sums.iter().zip(w).map(|(s, wi)| ((1.0 - eps) * s).min(*wi)).collect();
    let removed = kept.iter().zip(w).map(|(k, wi)| (wi - k).max(0.0)).collect();
    (kept, removed)
}

/// A robust plan with the flow it came from (used for dual certificates).
#[derive(Debug, Clone)]
pub struct CouplingSolution {
    pub plan: RobustPlan,
    pub flow: FlowSolution,
    /// Capacities of the network `flow` was computed on.
    pub source_caps: Vec<f64>,
    pub sink_caps: Vec<f64>,
}

/// Solves the coupling network on raw weights and a cost table (`C_ij = d^p`).
pub fn solve_coupling<C: Costs>(
    mu: &[f64],
    nu: &[f64],
    costs: &C,
    p: f64,
    eps_mu: f64,
    eps_nu: f64,
) -> Result<CouplingSolution> {
    check_eps(eps_mu)?;
    check_eps(eps_nu)?;
    let p = Exponent::finite(p)?;
    let src: Vec<f64> = mu.iter().map(|w| w / (1.0 - eps_mu)).collect();
    let snk: Vec<f64> = nu.iter().map(|w| w / (1.0 - eps_nu)).collect();
    let net = TransportNetwork::new(src, snk, costs, 1.0);
    let sol = flow::min_cost_flow(&net)?;
    if sol.status != FlowStatus::Optimal {
        return Err(Error::Internal("coupling network reported infeasible".into()));
    }
    let plan = RobustPlan::from_coupling(sol.flow.clone(), mu, nu, eps_mu, eps_nu, sol.total_cost, p);
    plan.verify(mu, nu)?;
    Ok(CouplingSolution {
        plan,
        flow: sol,
        source_caps: net.source_caps,
        sink_caps: net.sink_caps,
    })
}

/// Coupling network for `p = 1` on the real line, solved on the path of sorted atoms.
fn solve_coupling_line(mu: &DiscreteMeasure, nu: &DiscreteMeasure, eps_mu: f64, eps_nu: f64) -> Result<RobustPlan> {
    check_eps(eps_mu)?;
    check_eps(eps_nu)?;
    let (w_mu, w_nu) = (mu.weights(), nu.weights());
    let xs: Vec<f64> = mu.points().map(|x| x[0]).collect();
    let ys: Vec<f64> = nu.points().map(|y| y[0]).collect();
    let src: Vec<f64> = w_mu.iter().map(|w| w / (1.0 - eps_mu)).collect();
    let snk: Vec<f64> = w_nu.iter().map(|w| w / (1.0 - eps_nu)).collect();
    let (coupling, cost) = flow::line_transport(&xs, &ys, &src, &snk, 1.0)?;
    let plan = RobustPlan::from_coupling(coupling, w_mu, w_nu, eps_mu, eps_nu, cost, Exponent::finite(1.0)?);
    plan.verify(w_mu, w_nu)?;
    Ok(plan)
}

fn solve_mass_removal<C: Costs>(mu: &[f64], nu: &[f64], costs: &C, p: f64, eps: f64) -> Result<RobustPlan> {
    check_eps(eps)?;
    let exp = Exponent::finite(p)?;
    let net = TransportNetwork::new(mu.to_vec(), nu.to_vec(), costs, 1.0 - eps);
    let sol = flow::min_cost_flow(&net)?;
    if sol.status != FlowStatus::Optimal {
        return Err(Error::Internal("mass-removal network reported infeasible".into()));
    }
    let scale = 1.0 / (1.0 - eps);
    let coupling = sol.flow.iter().map(|&(i, j, f)| (i, j, f * scale)).collect();
    let plan = RobustPlan::from_coupling(coupling, mu, nu, eps, eps, sol.total_cost * scale, exp);
    plan.verify(mu, nu)?;
    Ok(plan)
}

/// Robust distance on raw weights and costs `C_ij = d(x_i, y_j)^p`.
pub fn robust_wp_costs<C: Costs>(mu: &[f64], nu: &[f64], costs: &C, cfg: &RobustSolveConfig) -> Result<RobustPlan> {
    cfg.validate()?;
    let p = finite_p(cfg.p)?;
    match cfg.formulation {
        Formulation::CouplingPrimal => Ok(solve_coupling(mu, nu, costs, p, cfg.eps_mu, cfg.eps_nu)?.plan),
        Formulation::MassRemoval => {
            if !cfg.is_symmetric() {
                return Err(Error::invalid("the mass-removal formulation needs equal radii"));
            }
            solve_mass_removal(mu, nu, costs, p, cfg.eps_mu)
        }
        Formulation::MassAddition => Err(Error::invalid(
            "the mass-addition formulation yields a value only; use robust_wp_mass_addition",
        )),
    }
}

/// Classical `W_p(μ, ν)` and an optimal coupling.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<(f64, RobustPlan)> {
    robust_wp(mu, nu, &RobustSolveConfig::symmetric(p, 0.0)?)
}

/// `W_p^{εμ,εν}(μ, ν)` under the Euclidean ground metric.
pub fn robust_wp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cfg: &RobustSolveConfig) -> Result<(f64, RobustPlan)> {
    cfg.validate()?;
    let p = finite_p(cfg.p)?;
    if p == 1.0 && mu.dim() == 1 && nu.dim() == 1 && cfg.formulation == Formulation::CouplingPrimal {
        let plan = solve_coupling_line(mu, nu, cfg.eps_mu, cfg.eps_nu)?;
        return Ok((plan.value, plan));
    }
    let costs = GroundCosts::euclidean(mu, nu, cfg.p)?;
    let plan = robust_wp_costs(mu.weights(), nu.weights(), &costs, cfg)?;
    Ok((plan.value, plan))
}

/// One-sided distance: only `μ` may shed mass.
pub fn one_sided_robust_wp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, eps: f64) -> Result<(f64, RobustPlan)> {
    robust_wp(mu, nu, &RobustSolveConfig::one_sided(p, eps)?)
}

/// Cost table of `costs` bordered by one zero-cost row and one zero-cost column.
struct Bordered<'a, C> {
    inner: &'a C,
}

impl<C: Costs> Costs for Bordered<'_, C> {
    fn n_rows(&self) -> usize {
        self.inner.n_rows() + 1
    }

    fn n_cols(&self) -> usize {
        self.inner.n_cols() + 1
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        if i < self.inner.n_rows() && j < self.inner.n_cols() {
            self.inner.cost(i, j)
        } else {
            0.0
        }
    }

    fn max_cost(&self) -> f64 {
        self.inner.max_cost()
    }
}

/// Mass-addition value on raw weights and costs.
///
/// With `δ = ε/(1+ε)` each side keeps `(1-δ)` of its mass and receives `δ`
/// of freely placed mass. Free mass on one side is matched at zero cost, so
/// it collapses to one slack row and one slack column.
pub fn mass_addition_costs<C: Costs>(mu: &[f64], nu: &[f64], costs: &C, p: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let p = finite_p(Exponent::finite(p)?)?;
    let delta = eps / (1.0 + eps);
    let mut src: Vec<f64> = mu.iter().map(|w| (1.0 - delta) * w).collect();
    src.push(delta);
    let mut snk: Vec<f64> = nu.iter().map(|w| (1.0 - delta) * w).collect();
    snk.push(delta);
    let net = TransportNetwork::new(src, snk, Bordered { inner: costs }, 1.0);
    let sol = flow::min_cost_flow(&net)?;
    if sol.status != FlowStatus::Optimal {
        return Err(Error::Internal("mass-addition network reported infeasible".into()));
    }
    Ok((sol.total_cost / (1.0 - 2.0 * delta)).max(0.0).powf(1.0 / p))
}

pub fn robust_wp_mass_addition(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, eps: f64) -> Result<f64> {
    let costs = GroundCosts::euclidean(mu, nu, Exponent::finite(p)?)?;
    mass_addition_costs(mu.weights(), nu.weights(), &costs, p, eps)
}

/// TV-ball variant on raw weights and costs; `eps` is a TV-norm radius in `[0, 2]`.
///
/// A TV move of size `ε` removes `ε/2` of mass and adds `ε/2` elsewhere.
/// Added mass on either side can sit where its partner is, so one slack row
/// and one slack column of capacity `ε/2` each model all additions.
pub fn tv_robust_costs<C: Costs>(mu: &[f64], nu: &[f64], costs: &C, p: f64, eps: f64) -> Result<f64> {
    let p = finite_p(Exponent::finite(p)?)?;
    if !(0.0..=2.0).contains(&eps) {
        return Err(Error::invalid(format!("TV radius {eps} not in [0, 2]")));
    }
    let half = eps / 2.0;
    let mut src = mu.to_vec();
    src.push(half);
    let mut snk = nu.to_vec();
    snk.push(half);
    let net = TransportNetwork::new(src, snk, Bordered { inner: costs }, 1.0);
    let sol = flow::min_cost_flow(&net)?;
    if sol.status != FlowStatus::Optimal {
        return Err(Error::Internal("TV network reported infeasible".into()));
    }
    Ok(sol.total_cost.max(0.0).powf(1.0 / p))
}

pub fn tv_robust_wp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, eps: f64) -> Result<f64> {
    let costs = GroundCosts::euclidean(mu, nu, Exponent::finite(p)?)?;
    tv_robust_costs(mu.weights(), nu.weights(), &costs, p, eps)
}

/// Robust `W_∞` on raw weights and a distance table.
///
/// The value is the smallest distance threshold `t` for which the arcs with
/// `d <= t` carry a unit flow under capacities `μ/(1-ε)` and `ν/(1-ε)`.
pub fn robust_winf_costs<C: Costs>(mu: &[f64], nu: &[f64], dist: &C, eps: f64) -> Result<RobustPlan> {
    check_eps(eps)?;
    let (n, m) = (mu.len(), nu.len());
    let mut levels: Vec<f64> = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let d = dist.cost(i, j);
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::invalid(format!("distance ({i},{j}) = {d} is not finite and nonnegative")));
            }
            levels.push(d);
        }
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let src: Vec<f64> = mu.iter().map(|w| w / (1.0 - eps)).collect();
    let snk: Vec<f64> = nu.iter().map(|w| w / (1.0 - eps)).collect();
    let network_at = |t: f64| {
        TransportNetwork::new(src.clone(), snk.clone(), dist, 1.0)
            .with_mask(EdgeMask::from_fn(n, m, |i, j| dist.cost(i, j) <= t))
    };
    // invariant: levels[hi] feasible; levels[lo - 1] infeasible
    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if flow::max_flow_feasible(&network_at(levels[mid])) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let t = levels[hi];
    let (value, coupling) = flow::max_flow(&network_at(t))?;
    if value < 1.0 - flow::SHORTFALL_TOLERANCE {
        return Err(Error::Internal(format!("threshold {t} routes only {value}")));
    }
    let plan = RobustPlan::from_coupling(coupling, mu, nu, eps, eps, t, Exponent::Infinity);
    plan.verify(mu, nu)?;
    Ok(plan)
}

pub fn robust_winf(mu: &DiscreteMeasure, nu: &DiscreteMeasure, eps: f64) -> Result<(f64, RobustPlan)> {
    let dist = GroundCosts::euclidean(mu, nu, Exponent::Infinity)?;
    let plan = robust_winf_costs(mu.weights(), nu.weights(), &dist, eps)?;
    Ok((plan.value, plan))
}

/// Rewrites an optimal plan between two uniform `n`-point measures as a
/// vertex solution.
///
/// The result keeps mass `1/n` on `⌊(1-ε)n⌋` atoms per side and the
/// remainder `⌈εn⌉/n - ε` on at most one further atom. It is obtained by
/// re-solving on the support of `plan`, where `plan` is still feasible, so
/// the value does not increase.
pub fn vertex_round(plan: &RobustPlan, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<RobustPlan> {
    let n = mu.len();
    if !mu.is_uniform(1e-12) || !nu.is_uniform(1e-12) || nu.len() != n {
        return Err(Error::invalid("vertex rounding needs two uniform measures with the same number of atoms"));
    }
    if plan.eps_mu != plan.eps_nu {
        return Err(Error::invalid("vertex rounding needs equal radii"));
    }
    if plan.kept_mu.len() != n || plan.kept_nu.len() != n {
        return Err(Error::invalid("plan does not match the measures"));
    }
    let p = finite_p(plan.p)?;
    let eps = plan.eps_mu;
    if eps == 0.0 {
        return Ok(plan.clone());
    }
    let costs = GroundCosts::euclidean(mu, nu, plan.p)?;
    let mut mask = EdgeMask::empty(n, n);
    for &(i, j, _) in &plan.coupling {
        mask.set(i, j, true);
    }
    let cap = 1.0 / (n as f64 * (1.0 - eps));
    let net = TransportNetwork::new(vec![cap; n], vec![cap; n], &costs, 1.0).with_mask(mask);
    let sol = flow::min_cost_flow(&net)?;
    if sol.status != FlowStatus::Optimal {
        return Err(Error::Internal("plan support does not carry a unit flow".into()));
    }
    let mut out = RobustPlan::from_coupling(sol.flow, mu.weights(), nu.weights(), eps, eps, sol.total_cost, Exponent::Finite(p));
    let unit = 1.0 / n as f64;
    for (kept, removed) in [(&mut out.kept_mu, &mut out.removed_mu), (&mut out.kept_nu, &mut out.removed_nu)] {
        for (k, r) in kept.iter_mut().zip(removed.iter_mut()) {
            if (*k - unit).abs() <= 1e-12 {
                *k = unit;
                *r = 0.0;
            } else if k.abs() <= 1e-12 {
                *k = 0.0;
                *r = unit;
            }
        }
    }
    out.verify(mu.weights(), nu.weights())?;
    Ok(out)
}
