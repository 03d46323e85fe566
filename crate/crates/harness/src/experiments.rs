//! Registered experiments and the driver that runs them.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;

use robust_ot::radius::{consistency_schedule, elbow_detect, ElbowConfig};
use robust_ot::robust::{robust_wp, tv_robust_wp, wasserstein, RobustSolveConfig};
use robust_ot::sampling::{self, rng};
use robust_ot::{huber_mix, ContaminationSpec, DiscreteMeasure};

use crate::error::{invalid, HarnessError, Result};
use crate::fixtures::{calibration, elbow_fixture, recovery_fixture, RiskCalibration};
use crate::spec::{csv_path, find_record, read_records, sort_records, Assertion, ExperimentOutcome, ExperimentSpec, Params, TrialKey, TrialRecord};
use crate::stats::{log_log_slope, mean, trial_seed};

type Values = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub threads: usize,
    /// Reuse records found in an existing CSV at the output path.
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { threads: 1, resume: false }
    }
}

trait Experiment: Sync {
    fn param_names(&self) -> &'static [&'static str];
    fn tasks(&self, p: &Params, seeds: &[u64]) -> Result<Vec<TrialKey>>;
    fn trial(&self, p: &Params, key: &TrialKey) -> Result<Values>;
    fn assess(&self, p: &Params, records: &[TrialRecord]) -> Result<(Vec<Assertion>, Values)>;
}

const NAMES: [&str; 6] = ["risk_sandwich", "exact_recovery", "rate_fit", "robust_consistency", "sandwich_tv", "elbow"];

/// Names accepted by [`run_experiment`].
pub fn registered() -> &'static [&'static str] {
    &NAMES
}

fn lookup(name: &str) -> Result<&'static dyn Experiment> {
    Ok(match name {
        "risk_sandwich" => &RiskSandwich,
        "exact_recovery" => &ExactRecovery,
        "rate_fit" => &RateFit,
        "robust_consistency" => &RobustConsistency,
        "sandwich_tv" => &SandwichTv,
        "elbow" => &Elbow,
        other => return Err(HarnessError::UnknownExperiment(other.to_string())),
    })
}

fn key(seed: u64, n: usize, eps: f64, variant: u32) -> TrialKey {
    TrialKey { seed, n, eps, variant }
}

fn values(pairs: &[(&str, f64)]) -> Values {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn rwp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, eps: f64) -> Result<f64> {
    Ok(robust_wp(mu, nu, &RobustSolveConfig::symmetric(p, eps)?)?.0)
}

/// Doubling grid `n_min, 2·n_min, ...` up to `n_max`.
fn doubling(p: &Params, n_min: usize, n_max: usize) -> Result<Vec<usize>> {
    let lo = p.usize_or("nMin", n_min)?;
    let hi = p.usize_or("nMax", n_max)?;
    if lo == 0 || hi < lo {
        return Err(invalid("need 1 <= nMin <= nMax"));
    }
    Ok(std::iter::successors(Some(lo), |&n| Some(n * 2)).take_while(|&n| n <= hi).collect())
}

fn all_pass(name: &str, records: &[TrialRecord], ok: impl Fn(&TrialRecord) -> bool) -> Assertion {
    let failed: Vec<String> = records
        .iter()
        .filter(|r| !ok(r))
        .map(|r| format!("seed {} n {}", r.seed, r.n))
        .collect();
    let detail = if failed.is_empty() {
        format!("{} trials", records.len())
    } else {
        format!("failed on {}", failed.join(", "))
    };
    Assertion::new(name, failed.is_empty(), detail)
}

/// Runs every trial of `spec` (reusing cached records when resuming), sorts
/// the records by key, checks the experiment's assertions, and writes the
/// CSV and JSON summary when an output path is set.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ExperimentOutcome> {
    spec.validate()?;
    if opts.threads == 0 {
        return Err(invalid("threads must be at least 1"));
    }
    let exp = lookup(&spec.name)?;
    spec.params.check_known(exp.param_names())?;
    let keys = exp.tasks(&spec.params, &spec.seeds)?;

    let cached = match (&spec.output_path, opts.resume) {
        (Some(dir), true) if csv_path(dir, &spec.name).exists() => read_records(&csv_path(dir, &spec.name))?,
        _ => Vec::new(),
    };
    let mut records = Vec::with_capacity(keys.len());
    let mut todo = Vec::new();
    for k in &keys {
        match find_record(&cached, k) {
            Some(r) => records.push(r.clone()),
            None => todo.push(*k),
        }
    }
    let resumed = records.len();

    let results = parallel_map(&todo, opts.threads, |k| {
        let start = Instant::now();
        let values = exp.trial(&spec.params, k)?;
        if let Some((name, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(HarnessError::Solver(robust_ot::Error::Numeric(format!(
                "trial seed {} n {}: value `{name}` is {v}",
                k.seed, k.n
            ))));
        }
        Ok(TrialRecord {
            seed: k.seed,
            n: k.n,
            eps: k.eps,
            variant: k.variant,
            values,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    });
    for r in results {
        records.push(r?);
    }
    sort_records(&mut records);
    let (assertions, summary) = exp.assess(&spec.params, &records)?;
    let outcome = ExperimentOutcome {
        spec: spec.clone(),
        records,
        assertions,
        summary,
        resumed,
    };
    if let Some(dir) = &spec.output_path {
        outcome.write(dir)?;
    }
    Ok(outcome)
}

/// Applies `f` to every item on up to `threads` workers; output order follows input order.
fn parallel_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut out: Vec<(usize, U)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads.min(items.len()))
            .map(|_| {
                s.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= items.len() {
                            break mine;
                        }
                        mine.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("trial worker panicked")).collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, u)| u).collect()
}

/// Gaussian clean measures, far point outliers on opposite sides, and the
/// chain `(1-3ε)·W_p^{3ε}(μ,ν) ≤ W_p^ε(μ̃,ν̃) ≤ W_p(μ,ν)` together with the
/// risk bound `|W_p^ε(μ̃,ν̃) - W_p(μ,ν)| ≤ τ·W_p(μ,ν) + C·ε^{1/p-1/q}`,
/// `τ = 1 - (1-3ε)^{1/p}`.
pub struct RiskSandwich;

/// `n` draws of `shift + σ·N(0, I_d)` where `σ = tail_scale` with probability
/// `tail_weight` and `core_scale` otherwise.
fn scale_mixture(n: usize, d: usize, shift: f64, cal: &RiskCalibration, seed: u64) -> Result<DiscreteMeasure> {
    let mut r = rng(seed);
    let pts = (0..n)
        .map(|_| {
            let s = if r.random::<f64>() < cal.tail_weight { cal.tail_scale } else { cal.core_scale };
            (0..d).map(|_| shift + s * r.sample::<f64, _>(rand_distr::StandardNormal)).collect()
        })
        .collect();
    Ok(DiscreteMeasure::uniform(pts)?)
}

/// `(Σ w_i |x_i - m|^q)^{1/q}` around the weighted mean `m`.
fn centered_moment(m: &DiscreteMeasure, q: f64) -> f64 {
    let d = m.dim();
    let mut mean = vec![0.0; d];
    for (x, w) in m.points().zip(m.weights()) {
        for (a, b) in mean.iter_mut().zip(x) {
            *a += w * b;
        }
    }
    let s: f64 = m
        .points()
        .zip(m.weights())
        .map(|(x, w)| w * robust_ot::measure::euclidean(x, &mean).powf(q))
        .sum();
    s.powf(1.0 / q)
}

/// Per-trial quantities of the risk sandwich, also used to fit the constant.
pub fn risk_trial(seed: u64, cal: &RiskCalibration, distance: f64) -> Result<Values> {
    let (n, d, eps, p) = (cal.n, cal.d, cal.eps, cal.p);
    let mu = scale_mixture(n, d, 0.0, cal, trial_seed(seed, n, 0))?;
    let nu = scale_mixture(n, d, cal.shift, cal, trial_seed(seed, n, 1))?;
    let far = |sign: f64| {
        let mut x = vec![0.0; d];
        x[0] = sign * distance;
        DiscreteMeasure::dirac(x)
    };
    let mt = huber_mix(&ContaminationSpec { base: mu.clone(), outlier: far(1.0)?, level: eps, seed })?;
    let nt = huber_mix(&ContaminationSpec { base: nu.clone(), outlier: far(-1.0)?, level: eps, seed })?;
    let wp = wasserstein(&mu, &nu, p)?.0;
    let robust = rwp(&mt, &nt, p, eps)?;
    let lower = (1.0 - 3.0 * eps) * rwp(&mu, &nu, p, 3.0 * eps)?;
    let naive = wasserstein(&mt, &nt, p)?.0;
    let moment = centered_moment(&mu, cal.q).max(centered_moment(&nu, cal.q));
    let tau = 1.0 - (1.0 - 3.0 * eps).powf(1.0 / p);
    Ok(values(&[
        ("wp", wp),
        ("robust", robust),
        ("lower", lower),
        ("naive", naive),
        ("moment", moment),
        ("deviation", (robust - wp).abs()),
        ("tauTerm", tau * wp),
        ("rateTerm", moment * eps.powf(1.0 / p - 1.0 / cal.q)),
    ]))
}

/// Refits the risk-bound constant: the largest `(|W_p^ε(μ̃,ν̃) - W_p| - τ·W_p)/(M·ε^{1/p-1/q})`
/// over the calibration seeds and both outlier distances, times the safety factor.
pub fn fit_risk_constant(cal: &RiskCalibration) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &s in &cal.calibration_seeds {
        for distance in [cal.outlier_distance, cal.near_distance] {
            let v = risk_trial(s, cal, distance)?;
            worst = worst.max((v["deviation"] - v["tauTerm"]) / v["rateTerm"]);
        }
    }
    Ok(worst * cal.safety_factor)
}

impl Experiment for RiskSandwich {
    fn param_names(&self) -> &'static [&'static str] {
        &["eps", "p", "q", "n", "d", "shift", "outlierDistance", "nearDistance", "constant"]
    }

    fn tasks(&self, p: &Params, seeds: &[u64]) -> Result<Vec<TrialKey>> {
        let cal = risk_setting(p)?;
        // variant 0 puts the outliers far away, variant 1 just outside the bulk
        Ok(seeds.iter().flat_map(|&s| [key(s, cal.n, cal.eps, 0), key(s, cal.n, cal.eps, 1)]).collect())
    }

    fn trial(&self, p: &Params, k: &TrialKey) -> Result<Values> {
        let cal = risk_setting(p)?;
        let distance = if k.variant == 0 { cal.outlier_distance } else { cal.near_distance };
        let mut v = risk_trial(k.seed, &cal, distance)?;
        let c = p.f64_or("constant", cal.constant)?;
        v.insert("bound".into(), v["tauTerm"] + c * v["rateTerm"]);
        Ok(v)
    }

    fn assess(&self, p: &Params, records: &[TrialRecord]) -> Result<(Vec<Assertion>, Values)> {
        let cal = risk_setting(p)?;
        let tol = |r: &TrialRecord| 1e-8 * (1.0 + r.value("wp"));
        let out = vec![
            all_pass("sandwich", records, |r| {
                r.value("lower") <= r.value("robust") + tol(r) && r.value("robust") <= r.value("wp") + tol(r)
            }),
            all_pass("risk bound", records, |r| r.value("deviation") <= r.value("bound") + tol(r)),
            // the unrobust distance must pay for moving the outlier mass
            all_pass("naive distance grows with the outliers", records, |r| {
                r.variant == 1 || r.eps == 0.0 || r.value("naive") >= 0.5 * r.eps.powf(1.0 / cal.p) * cal.outlier_distance
            }),
        ];
        let worst = records.iter().map(|r| r.value("deviation") - r.value("bound")).fold(f64::NEG_INFINITY, f64::max);
        Ok((out, values(&[("worstMargin", worst)])))
    }
}

/// The checked-in setting with any overrides from `p` applied.
fn risk_setting(p: &Params) -> Result<RiskCalibration> {
    let mut cal = calibration().risk_sandwich;
    cal.eps = p.f64_or("eps", cal.eps)?;
    cal.p = p.f64_or("p", cal.p)?;
    cal.q = p.f64_or("q", cal.q)?;
    cal.n = p.usize_or("n", cal.n)?;
    cal.d = p.usize_or("d", cal.d)?;
    cal.shift = p.f64_or("shift", cal.shift)?;
    cal.outlier_distance = p.f64_or("outlierDistance", cal.outlier_distance)?;
    cal.near_distance = p.f64_or("nearDistance", cal.near_distance)?;
    if !(0.0..=0.25).contains(&cal.eps) {
        return Err(invalid("risk sandwich needs 0 <= eps <= 1/4"));
    }
    if !(cal.p >= 1.0 && cal.q > cal.p) {
        return Err(invalid("risk sandwich needs 1 <= p < q"));
    }
    if cal.n == 0 || cal.d == 0 {
        return Err(invalid("risk sandwich needs n, d >= 1"));
    }
    Ok(cal)
}

/// Separated outliers are removed exactly: `W_p^ε(μ̃,ν̃) = W_p(μ,ν)`.
pub struct ExactRecovery;

impl Experiment for ExactRecovery {
    fn param_names(&self) -> &'static [&'static str] {
        &["eps", "p", "n", "separation"]
    }

    fn tasks(&self, p: &Params, seeds: &[u64]) -> Result<Vec<TrialKey>> {
        let eps = p.f64_or("eps", 0.1)?;
        if !(0.0..1.0).contains(&eps) {
            return Err(invalid("eps must lie in [0, 1)"));
        }
        let n = p.usize_or("n", 10)?;
        Ok(seeds.iter().map(|&s| key(s, n, eps, 0)).collect())
    }

    fn trial(&self, p: &Params, k: &TrialKey) -> Result<Values> {
        let pe = p.f64_or("p", 1.0)?;
        let fx = recovery_fixture(k.seed, k.n, p.f64_or("separation", 3.0)?, k.eps)?;
        let wp = wasserstein(&fx.mu, &fx.nu, pe)?.0;
        let robust = rwp(&fx.mu_tilde, &fx.nu_tilde, pe, k.eps)?;
        let clean = rwp(&fx.mu, &fx.nu, pe, k.eps)?;
        Ok(values(&[
            ("wp", wp),
            ("robust", robust),
            ("gap", (robust - wp).abs()),
            ("cleanRobust", clean),
            ("separationRatio", fx.separation_ratio()),
        ]))
    }

    fn assess(&self, _: &Params, records: &[TrialRecord]) -> Result<(Vec<Assertion>, Values)> {
        let separated: Vec<TrialRecord> = records.iter().filter(|r| r.value("separationRatio") > 1.0).cloned().collect();
        let out = vec![
            all_pass("exact recovery", &separated, |r| r.value("gap") <= 1e-8),
            all_pass("trimming clean data lowers the distance", records, |r| {
                r.eps == 0.0 || r.value("cleanRobust") < r.value("wp")
            }),
        ];
        let worst = records.iter().map(|r| r.value("gap")).fold(0.0, f64::max);
        Ok((out, values(&[("worstGap", worst), ("separatedTrials", separated.len() as f64)])))
    }
}

/// Two independent samples of size `n` from the unit cube, or from the
/// line fixture when `geometry = line`.
fn rate_sample(geometry: &str, n: usize, d: usize, tau: f64, seed: u64) -> Result<DiscreteMeasure> {
    match geometry {
        "cube" => Ok(sampling::uniform_cube(n, d, seed)?),
        "line" => {
            // mass 1-τ on the main diagonal, τ uniform in the cube
            let mut r = rng(seed);
            let pts = (0..n)
                .map(|_| {
                    if r.random::<f64>() < tau {
                        (0..d).map(|_| r.random::<f64>()).collect()
                    } else {
                        vec![r.random::<f64>(); d]
                    }
                })
                .collect();
            Ok(DiscreteMeasure::uniform(pts)?)
        }
        other => Err(invalid(format!("unknown geometry `{other}`; expected cube or line"))),
    }
}

/// Empirical convergence rate of `W_p^ε` between two samples, fitted on a
/// doubling grid of sample sizes, for `ε = 0` and `ε = eps`.
pub struct RateFit;

impl Experiment for RateFit {
    fn param_names(&self) -> &'static [&'static str] {
        &["eps", "p", "d", "nMin", "nMax", "geometry", "tau"]
    }

    fn tasks(&self, p: &Params, seeds: &[u64]) -> Result<Vec<TrialKey>> {
        let d = p.usize_or("d", 3)?;
        let pe = p.f64_or("p", 1.0)?;
        if d < 3 || !(pe < d as f64 / 2.0) {
            return Err(invalid("rate fit needs d >= 3 and p < d/2"));
        }
        let eps = p.f64_or("eps", 0.1)?;
        if !(0.0..1.0).contains(&eps) {
            return Err(invalid("eps must lie in [0, 1)"));
        }
        let grid = doubling(p, 100, 3200)?;
        if grid.len() < 2 {
            return Err(invalid("rate fit needs at least two sample sizes"));
        }
        let mut out = Vec::new();
        for &s in seeds {
            for &n in &grid {
                out.push(key(s, n, 0.0, 0));
                if eps > 0.0 {
                    out.push(key(s, n, eps, 0));
                }
            }
        }
        Ok(out)
    }

    fn trial(&self, p: &Params, k: &TrialKey) -> Result<Values> {
        let (d, tau) = (p.usize_or("d", 3)?, p.f64_or("tau", 0.05)?);
        let geometry = p.str_or("geometry", "cube")?;
        let mu = rate_sample(geometry, k.n, d, tau, trial_seed(k.seed, k.n, 0))?;
        let nu = rate_sample(geometry, k.n, d, tau, trial_seed(k.seed, k.n, 1))?;
        Ok(values(&[("robust", rwp(&mu, &nu, p.f64_or("p", 1.0)?, k.eps)?)]))
    }

    fn assess(&self, p: &Params, records: &[TrialRecord]) -> Result<(Vec<Assertion>, Values)> {
        let eps = p.f64_or("eps", 0.1)?;
        let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
        seeds.dedup();
        let slope_for = |e: f64| -> f64 {
            let per_seed: Vec<f64> = seeds
                .iter()
                .filter_map(|&s| {
                    let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.seed == s && r.eps == e).collect();
                    let ns: Vec<f64> = rs.iter().map(|r| r.n as f64).collect();
                    let vs: Vec<f64> = rs.iter().map(|r| r.value("robust")).collect();
                    log_log_slope(&ns, &vs)
                })
                .collect();
            mean(&per_seed)
        };
        let s0 = slope_for(0.0);
        let mut summary = values(&[("slopeEps0", s0)]);
        let mut out = Vec::new();
        let banded = p.str_or("geometry", "cube")? == "cube";
        let band = |s: f64| (-0.50..=-0.20).contains(&s);
        if banded {
            out.push(Assertion::new("slope band at eps 0", band(s0), format!("mean slope {s0:.4}")));
        }
        if eps > 0.0 {
            let s1 = slope_for(eps);
            summary.insert("slopeEps".into(), s1);
            if banded {
                out.push(Assertion::new("slope band at eps", band(s1), format!("mean slope {s1:.4}")));
                out.push(Assertion::new(
                    "slopes agree",
                    (s1 - s0).abs() <= 0.05,
                    format!("difference {:.4}", (s1 - s0).abs()),
                ));
            }
        }
        Ok((out, summary))
    }
}

/// `n` draws from `Unif[shift, shift + 1]` with the first `k` replaced by
/// heavy-tailed outliers `sign·scale/U`.
fn corrupted_uniform(n: usize, k: usize, shift: f64, sign: f64, scale: f64, seed: u64) -> Result<DiscreteMeasure> {
    let mut r = rng(seed);
    let pts = (0..n)
        .map(|i| {
            let u: f64 = r.random();
            if i < k {
                vec![sign * scale / (1.0 - u)]
            } else {
                vec![shift + u]
            }
        })
        .collect();
    Ok(DiscreteMeasure::uniform(pts)?)
}

/// `|W_p(μ,ν) - W_p^{ε_n}(μ̃_n,ν̃_n)|` with `ε_n = n^{-b}` when `⌈n^{1-a}⌉`
/// samples per side are outliers (variant 0), against a negative control
/// where a fixed fraction of the samples is corrupted (variant 1).
/// `μ = Unif[0,1]` and `ν = Unif[1,2]`, so `W_p(μ,ν) = 1` for every `p`.
pub struct RobustConsistency;

impl Experiment for RobustConsistency {
    fn param_names(&self) -> &'static [&'static str] {
        &["a", "b", "p", "nMin", "nMax", "outlierScale", "controlFraction"]
    }

    fn tasks(&self, p: &Params, seeds: &[u64]) -> Result<Vec<TrialKey>> {
        let (a, b) = (p.f64_or("a", 0.5)?, p.f64_or("b", 0.3)?);
        if !(a > b && b > 0.0 && a <= 1.0) {
            return Err(invalid("robust consistency needs 1 >= a > b > 0"));
        }
        let tau = p.f64_or("controlFraction", 0.3)?;
        if !(0.0..1.0).contains(&tau) {
            return Err(invalid("controlFraction must lie in [0, 1)"));
        }
        let grid = doubling(p, 100, 6400)?;
        let mut out = Vec::new();
        for &s in seeds {
            for &n in &grid {
                let eps = consistency_schedule(n as u64, b);
                out.push(key(s, n, eps, 0));
                out.push(key(s, n, eps, 1));
            }
        }
        Ok(out)
    }

    fn trial(&self, p: &Params, k: &TrialKey) -> Result<Values> {
        let a = p.f64_or("a", 0.5)?;
        let scale = p.f64_or("outlierScale", 1e3)?;
        let corrupted = match k.variant {
            0 => (k.n as f64).powf(1.0 - a).ceil() as usize,
            _ => (p.f64_or("controlFraction", 0.3)? * k.n as f64).ceil() as usize,
        }
        .min(k.n);
        let mu = corrupted_uniform(k.n, corrupted, 0.0, 1.0, scale, trial_seed(k.seed, k.n, 0))?;
        let nu = corrupted_uniform(k.n, corrupted, 1.0, -1.0, scale, trial_seed(k.seed, k.n, 1))?;
        let robust = rwp(&mu, &nu, p.f64_or("p", 1.0)?, k.eps)?;
        Ok(values(&[("robust", robust), ("error", (robust - 1.0).abs()), ("corrupted", corrupted as f64)]))
    }

    fn assess(&self, _: &Params, records: &[TrialRecord]) -> Result<(Vec<Assertion>, Values)> {
        let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
        seeds.dedup();
        let arm = |s: u64, v: u32| -> Vec<&TrialRecord> { records.iter().filter(|r| r.seed == s && r.variant == v).collect() };
        // a seed counts as decreasing when the log-log trend is negative and the last error is below the first
        let decreasing = seeds
            .iter()
            .filter(|&&s| {
                let rs = arm(s, 0);
                let ns: Vec<f64> = rs.iter().map(|r| r.n as f64).collect();
                let es: Vec<f64> = rs.iter().map(|r| r.value("error").max(1e-300)).collect();
                matches!(log_log_slope(&ns, &es), Some(sl) if sl < 0.0) && es.last() < es.first()
            })
            .count();
        let final_err = |v: u32| mean(&seeds.iter().filter_map(|&s| arm(s, v).last().map(|r| r.value("error"))).collect::<Vec<f64>>());
        let (robust, control) = (final_err(0), final_err(1));
        let need = (0.8 * seeds.len() as f64).ceil() as usize;
        let out = vec![
            Assertion::new(
                "error decreases in n",
                decreasing >= need,
                format!("{decreasing} of {} seeds", seeds.len()),
            ),
            Assertion::new(
                "beats the negative control",
                robust <= 0.25 * control,
                format!("final error {robust:.4e} vs control {control:.4e}"),
            ),
        ];
        Ok((
            out,
            values(&[("decreasingSeeds", decreasing as f64), ("finalError", robust), ("controlFinalError", control)]),
        ))
    }
}

/// `W_p^{2ε,TV}(μ,ν) ≤ W_p^ε(μ,ν) ≤ (1-ε)^{-1/p}·W_p^{ε,TV}(μ,ν)` on random instances.
pub struct SandwichTv;

impl Experiment for SandwichTv {
    fn param_names(&self) -> &'static [&'static str] {
        &["eps", "p", "n"]
    }

    fn tasks(&self, p: &Params, seeds: &[u64]) -> Result<Vec<TrialKey>> {
        let eps = p.f64_or("eps", 0.2)?;
        if !(0.0..0.5).contains(&eps) {
            return Err(invalid("sandwich needs 0 <= eps < 1/2"));
        }
        let n = p.usize_or("n", 6)?;
        Ok(seeds.iter().map(|&s| key(s, n, eps, 0)).collect())
    }

    fn trial(&self, p: &Params, k: &TrialKey) -> Result<Values> {
        let pe = p.f64_or("p", 1.0)?;
        let draw = |stream| -> Result<DiscreteMeasure> {
            let mut r = rng(trial_seed(k.seed, k.n, stream));
            let pts = (0..k.n).map(|_| vec![3.0 * r.random::<f64>(), 3.0 * r.random::<f64>()]).collect();
            let raw: Vec<f64> = (0..k.n).map(|_| 0.05 + r.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            Ok(DiscreteMeasure::new(pts, raw.iter().map(|w| w / s).collect())?)
        };
        let (mu, nu) = (draw(0)?, draw(1)?);
        Ok(values(&[
            ("robust", rwp(&mu, &nu, pe, k.eps)?),
            ("tvDouble", tv_robust_wp(&mu, &nu, pe, 2.0 * k.eps)?),
            ("tvSingle", tv_robust_wp(&mu, &nu, pe, k.eps)?),
            ("upperFactor", (1.0 - k.eps).powf(-1.0 / pe)),
        ]))
    }

    fn assess(&self, _: &Params, records: &[TrialRecord]) -> Result<(Vec<Assertion>, Values)> {
        Ok((
            vec![
                all_pass("lower sandwich", records, |r| r.value("tvDouble") <= r.value("robust") + 1e-8),
                all_pass("upper sandwich", records, |r| {
                    r.value("robust") <= r.value("upperFactor") * r.value("tvSingle") + 1e-8
                }),
            ],
            Values::new(),
        ))
    }
}

/// Radius selection on the line fixture: the elbow estimate and the slope
/// bounds of the robust curve on either side of the true level.
pub struct Elbow;

impl Experiment for Elbow {
    fn param_names(&self) -> &'static [&'static str] {
        &["eps", "p", "n", "distance", "step"]
    }

    fn tasks(&self, p: &Params, seeds: &[u64]) -> Result<Vec<TrialKey>> {
        let eps = p.f64_or("eps", 0.1)?;
        if !(0.0..0.5).contains(&eps) {
            return Err(invalid("elbow fixture needs 0 <= eps < 1/2"));
        }
        let n = p.usize_or("n", 20)?;
        Ok(seeds.iter().map(|&s| key(s, n, eps, 0)).collect())
    }

    fn trial(&self, p: &Params, k: &TrialKey) -> Result<Values> {
        let pe = p.f64_or("p", 1.0)?;
        let step = p.f64_or("step", 0.02)?;
        if !(step > 0.0 && step < 0.5) {
            return Err(invalid("step must lie in (0, 1/2)"));
        }
        let fx = elbow_fixture(k.seed, k.n, k.eps, p.f64_or("distance", 100.0)?)?;
        let mut cfg = ElbowConfig::new(pe);
        cfg.grid = (0..).map(|i| i as f64 * step).take_while(|d| *d <= 0.5 + 1e-12).collect();
        let rep = elbow_detect(&fx.mu_tilde, &fx.nu_tilde, &cfg)?;
        let mut before = f64::NEG_INFINITY;
        let mut after = f64::INFINITY;
        for (i, s) in rep.slopes.iter().enumerate() {
            if rep.grid[i + 1] <= k.eps + 1e-12 {
                before = before.max(*s);
            } else if rep.grid[i] >= k.eps - 1e-12 {
                after = after.min(*s);
            }
        }
        Ok(values(&[
            ("epsHat", rep.eps_hat),
            ("threshold", rep.slope_threshold),
            ("maxSlopeBefore", if before.is_finite() { before } else { f64::MIN }),
            ("minSlopeAfter", if after.is_finite() { after } else { f64::MAX }),
            ("outlierBound", -fx.outlier_gap.powf(pe)),
            ("inlierBound", -fx.diam.powf(pe)),
        ]))
    }

    fn assess(&self, p: &Params, records: &[TrialRecord]) -> Result<(Vec<Assertion>, Values)> {
        let step = p.f64_or("step", 0.02)?;
        let rel = 1e-6;
        Ok((
            vec![
                all_pass("elbow within one grid step", records, |r| (r.value("epsHat") - r.eps).abs() <= step + 1e-12),
                all_pass("steep before the level", records, |r| {
                    r.value("maxSlopeBefore") <= r.value("outlierBound") * (1.0 - rel)
                }),
                all_pass("flat after the level", records, |r| {
                    r.value("minSlopeAfter") >= r.value("inlierBound") * (1.0 + rel)
                }),
            ],
            Values::new(),
        ))
    }
}
