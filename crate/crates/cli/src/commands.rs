use std::path::Path;

use robust_ot::dual::{certify, dual_ascent, AscentConfig, DualCertificate};
use robust_ot::privacy::{mechanism_calibrate, mechanism_release, PufferfishFramework};
use robust_ot::radius::{elbow_detect, ElbowConfig};
use robust_ot::robust::{robust_winf_costs, robust_wp_costs, tv_robust_costs, RobustSolveConfig};
use robust_ot::{CostMatrix, Costs, DiscreteMeasure, Exponent, GroundCosts, GroundMetric};
use robust_ot_harness::{run_experiment, ExperimentSpec, HarnessError, ParamValue, Params, RunOptions};

use crate::args::{ComputeArgs, ConvertArgs, DualArgs, DualMethod, ElbowArgs, ExperimentArgs, Pair, PrivacyArgs, Radii};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solve(#[from] robust_ot::Error),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    AssertionsFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Harness(HarnessError::InvalidSpec(_) | HarnessError::UnknownExperiment(_)) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Solve(_) => "solve",
            CliError::Harness(_) if self.exit_code() == 2 => "usage",
            CliError::Harness(_) => "experiment",
            CliError::Io(_) => "io",
            CliError::AssertionsFailed(_) => "assertion",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Twelve significant digits, then the shortest text that reads back to that value.
pub fn fmt_value(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded:?}")
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn parse_exponent(p: &str) -> Result<Exponent> {
    if matches!(p.to_ascii_lowercase().as_str(), "inf" | "infinity") {
        return Ok(Exponent::Infinity);
    }
    let v: f64 = p.parse().map_err(|_| usage(format!("--p expects a number or `inf`, got {p:?}")))?;
    Exponent::finite(v).map_err(|_| usage(format!("--p must be a finite number at least 1, got {p}")))
}

fn check_radius(flag: &str, eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(usage(format!("{flag} must lie in [0, 1), got {eps}")));
    }
    Ok(eps)
}

/// `(ε_μ, ε_ν)` from the radius flags.
fn radii(r: &Radii) -> Result<(f64, f64)> {
    match r.eps {
        Some(e) => {
            let e = check_radius("--eps", e)?;
            Ok((e, e))
        }
        None => Ok((
            check_radius("--eps-mu", r.eps_mu.unwrap_or(0.0))?,
            check_radius("--eps-nu", r.eps_nu.unwrap_or(0.0))?,
        )),
    }
}

struct Loaded {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    distances: Option<CostMatrix>,
}

impl Loaded {
    fn read(pair: &Pair) -> Result<Self> {
        Ok(Loaded {
            mu: DiscreteMeasure::read(&pair.mu)?,
            nu: DiscreteMeasure::read(&pair.nu)?,
            distances: pair.distances.as_ref().map(CostMatrix::read_csv).transpose()?,
        })
    }

    fn costs(&self, exponent: Exponent) -> Result<GroundCosts<'_>> {
        let metric = match &self.distances {
            Some(d) => GroundMetric::custom(d.clone(), exponent)?,
            None => GroundMetric::euclidean(exponent),
        };
        Ok(GroundCosts::new(&self.mu, &self.nu, &metric)?)
    }
}

pub fn compute(args: &ComputeArgs) -> Result<String> {
    let exponent = parse_exponent(&args.radii.p)?;
    let (eps_mu, mut eps_nu) = radii(&args.radii)?;
    if args.one_sided {
        eps_nu = 0.0;
    }
    if args.tv_variant && args.plan_out.is_some() {
        return Err(usage("--tv-variant reports a value only; drop --plan-out"));
    }
    let data = Loaded::read(&args.pair)?;
    let costs = data.costs(exponent)?;
    let (mu, nu) = (data.mu.weights(), data.nu.weights());

    let plan = match exponent {
        Exponent::Infinity => {
            if args.tv_variant {
                return Err(usage("--tv-variant needs a finite --p"));
            }
            if args.one_sided || eps_mu != eps_nu {
                return Err(usage("--p inf supports equal radii only"));
            }
            robust_winf_costs(mu, nu, &costs, eps_mu)?
        }
        Exponent::Finite(p) if args.tv_variant => {
            return Ok(fmt_value(tv_robust_costs(mu, nu, &costs, p, eps_mu)?));
        }
        Exponent::Finite(p) => robust_wp_costs(mu, nu, &costs, &RobustSolveConfig::asymmetric(p, eps_mu, eps_nu)?)?,
    };
    if let Some(path) = &args.plan_out {
        write_json(path, &plan.to_json())?;
    }
    Ok(fmt_value(plan.value))
}

pub fn dual(args: &DualArgs) -> Result<String> {
    let exponent = parse_exponent(&args.radii.p)?;
    let Exponent::Finite(p) = exponent else {
        return Err(usage("dual certificates need a finite --p"));
    };
    let (eps_mu, eps_nu) = radii(&args.radii)?;
    let data = Loaded::read(&args.pair)?;
    let costs = data.costs(exponent)?;
    let (mu, nu) = (data.mu.weights(), data.nu.weights());
    let cert: DualCertificate = match args.method {
        DualMethod::Flow => certify(mu, nu, &costs, p, eps_mu, eps_nu)?,
        DualMethod::Ascent => {
            let mut cfg = AscentConfig::for_scale(costs.max_cost());
            cfg.max_iters = args.max_iters;
            dual_ascent(mu, nu, &costs, p, eps_mu, eps_nu, &cfg)?.certificate
        }
    };
    if let Some(path) = &args.certificate_out {
        write_json(path, &cert.to_json())?;
    }
    Ok(format!(
        "objective {}\nprimalPower {}\ngap {}",
        fmt_value(cert.objective()),
        fmt_value(cert.primal_power),
        fmt_value(cert.gap)
    ))
}

pub fn elbow(args: &ElbowArgs, threads: usize) -> Result<String> {
    if !(args.grid_max > 0.0 && args.grid_max < 1.0) {
        return Err(usage(format!("--grid-max must lie in (0, 1), got {}", args.grid_max)));
    }
    if args.grid_steps < 2 {
        return Err(usage("--grid-steps must be at least 2"));
    }
    if let Some(t) = args.threshold {
        if !(t < 0.0) {
            return Err(usage(format!("--threshold must be negative, got {t}")));
        }
    }
    let data = Loaded::read(&args.pair)?;
    if data.distances.is_some() {
        return Err(usage("elbow supports the Euclidean metric only"));
    }
    let steps = args.grid_steps as f64;
    let cfg = ElbowConfig {
        p: args.p,
        grid: (0..=args.grid_steps).map(|k| args.grid_max * k as f64 / steps).collect(),
        slope_threshold: args.threshold,
        threads,
    };
    let report = elbow_detect(&data.mu, &data.nu, &cfg)?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("elbow.csv"), report.to_csv())?;
        write_json(&dir.join("elbow.json"), &report.summary_json())?;
    }
    Ok(fmt_value(report.eps_hat))
}

pub fn privacy(args: &PrivacyArgs) -> Result<String> {
    let fw = PufferfishFramework::read(&args.framework)?;
    let mut report = mechanism_calibrate(&fw)?;
    let released = match (args.release, args.seed) {
        (Some(v), Some(seed)) => {
            report.sample_seed = Some(seed);
            Some(mechanism_release(v, &report, seed))
        }
        _ => None,
    };
    let json = serde_json::to_value(&report).expect("report serializes");
    match (&args.out, released) {
        (Some(path), r) => {
            write_json(path, &json)?;
            Ok(r.map(fmt_value).unwrap_or_else(|| fmt_value(report.noise_scale)))
        }
        (None, Some(r)) => Ok(fmt_value(r)),
        (None, None) => Ok(serde_json::to_string_pretty(&json).expect("json value serializes")),
    }
}

/// `a..b`, `a..=b` or `a,b,c`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| usage(format!("bad seed {t:?} in --seeds")));
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b) = (num(a)?, num(b)?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        return Ok((a..b).collect());
    }
    s.split(',').map(num).collect()
}

pub fn experiment(args: &ExperimentArgs, threads: usize) -> Result<(String, bool)> {
    let mut params = Params::default();
    for kv in &args.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--param expects KEY=VALUE, got {kv:?}")))?;
        params.set(k.trim(), ParamValue::parse(v.trim()));
    }
    let spec = ExperimentSpec {
        name: args.name.clone(),
        params,
        seeds: parse_seeds(&args.seeds)?,
        output_path: Some(args.out.clone()),
    };
    let outcome = run_experiment(&spec, &RunOptions { threads, resume: args.resume })?;
    let lines: Vec<String> = outcome
        .assertions
        .iter()
        .map(|a| format!("{} {} ({})", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail))
        .collect();
    Ok((lines.join("\n"), outcome.passed()))
}

pub fn convert(args: &ConvertArgs) -> Result<String> {
    let m = DiscreteMeasure::read(&args.input)?;
    m.write(&args.output)?;
    Ok(format!("{} atoms in dimension {}", m.len(), m.dim()))
}
