use robust_ot_harness::experiments::fit_risk_constant;
use robust_ot_harness::fixtures::calibration;
use robust_ot_harness::spec::read_records;
use robust_ot_harness::{run_experiment, ExperimentSpec, ParamValue, RunOptions};

fn run(spec: &ExperimentSpec) -> robust_ot_harness::ExperimentOutcome {
    run_experiment(spec, &RunOptions::default()).unwrap()
}

fn fresh_seeds(k: u64) -> Vec<u64> {
    (0..k).collect()
}

#[test]
fn frozen_risk_constant_covers_its_calibration_seeds() {
    let cal = calibration().risk_sandwich;
    let refit = fit_risk_constant(&cal).unwrap();
    assert!(refit > 0.0 && refit <= cal.constant, "refit {refit} vs frozen {}", cal.constant);
    assert!(cal.calibration_seeds.iter().all(|s| !fresh_seeds(20).contains(s)));
}

#[test]
fn risk_sandwich_on_fresh_seeds() {
    let out = run(&ExperimentSpec::new("risk_sandwich", fresh_seeds(20)));
    assert!(out.passed(), "{:?}", out.assertions);
    assert_eq!(out.records.len(), 40);
    // far outliers are removed exactly
    for r in out.records.iter().filter(|r| r.variant == 0) {
        assert!(r.value("deviation") <= 1e-8, "{r:?}");
    }
}

#[test]
fn risk_sandwich_without_contamination_collapses() {
    let out = run(&ExperimentSpec::new("risk_sandwich", vec![3, 4]).with_param("eps", ParamValue::Int(0)));
    assert!(out.passed());
    for r in &out.records {
        assert!((r.value("lower") - r.value("wp")).abs() <= 1e-12);
        assert!((r.value("robust") - r.value("wp")).abs() <= 1e-12);
    }
}

#[test]
fn risk_sandwich_rejects_large_radius() {
    let spec = ExperimentSpec::new("risk_sandwich", vec![1]).with_param("eps", ParamValue::Real(0.3));
    assert!(run_experiment(&spec, &RunOptions::default()).is_err());
}

#[test]
fn exact_recovery_and_out_of_hypothesis_probe() {
    let out = run(&ExperimentSpec::new("exact_recovery", fresh_seeds(20)));
    assert!(out.passed(), "{:?}", out.assertions);
    assert_eq!(out.summary["separatedTrials"], 20.0);
    let probe = run(&ExperimentSpec::new("exact_recovery", fresh_seeds(5)).with_param("separation", ParamValue::Real(0.5)));
    assert!(probe.records.iter().all(|r| r.value("separationRatio") > 0.5));
    let p2 = run(&ExperimentSpec::new("exact_recovery", fresh_seeds(5)).with_param("p", ParamValue::Int(2)));
    assert!(p2.passed(), "{:?}", p2.assertions);
}

#[test]
fn sandwich_tv_holds() {
    for p in [1, 2] {
        let out = run(&ExperimentSpec::new("sandwich_tv", fresh_seeds(30)).with_param("p", ParamValue::Int(p)));
        assert!(out.passed(), "{:?}", out.assertions);
    }
}

#[test]
fn elbow_experiment_on_standard_fixture() {
    let out = run(&ExperimentSpec::new("elbow", fresh_seeds(3)));
    assert!(out.passed(), "{:?}", out.assertions);
}

#[test]
fn small_rate_fit_runs_and_reports_slopes() {
    let spec = ExperimentSpec::new("rate_fit", vec![1, 2])
        .with_param("nMin", ParamValue::Int(50))
        .with_param("nMax", ParamValue::Int(200));
    let out = run(&spec);
    assert_eq!(out.records.len(), 2 * 3 * 2);
    assert!(out.summary["slopeEps0"] < 0.0);
    assert!(out.summary["slopeEps"] < 0.0);
}

#[test]
fn lower_dimensional_inliers_decay_faster() {
    // most mass on a segment with the rest spread out, trimmed at a radius above the spread fraction
    let base = |geometry: &str| {
        ExperimentSpec::new("rate_fit", vec![1, 2, 3])
            .with_param("nMin", ParamValue::Int(100))
            .with_param("nMax", ParamValue::Int(800))
            .with_param("eps", ParamValue::Real(0.1))
            .with_param("geometry", ParamValue::Text(geometry.into()))
    };
    let cube = run(&base("cube"));
    let line = run(&base("line"));
    assert!(line.summary["slopeEps"] < cube.summary["slopeEps"], "{:?} vs {:?}", line.summary, cube.summary);
}

#[test]
fn consistency_trend_at_small_scale() {
    let spec = ExperimentSpec::new("robust_consistency", fresh_seeds(4)).with_param("nMax", ParamValue::Int(800));
    let out = run(&spec);
    assert!(out.passed(), "{:?}", out.assertions);
    // corruption follows ⌈n^(1-a)⌉ and the control keeps a fixed fraction
    let r = out.records.iter().find(|r| r.variant == 0 && r.n == 400).unwrap();
    assert_eq!(r.value("corrupted"), 20.0);
    let c = out.records.iter().find(|r| r.variant == 1 && r.n == 400).unwrap();
    assert_eq!(c.value("corrupted"), 120.0);
}

#[test]
fn csv_is_byte_stable_across_threads_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new("sandwich_tv", fresh_seeds(12));
    spec.output_path = Some(dir.path().to_path_buf());
    run_experiment(&spec, &RunOptions { threads: 1, resume: false }).unwrap();
    let first = std::fs::read(dir.path().join("sandwich_tv.csv")).unwrap();
    run_experiment(&spec, &RunOptions { threads: 3, resume: false }).unwrap();
    let second = std::fs::read(dir.path().join("sandwich_tv.csv")).unwrap();
    assert_eq!(first, second);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sandwich_tv.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["records"], 12);
    assert_eq!(summary["assertions"].as_array().unwrap().len(), 2);
}

#[test]
fn resume_reuses_finished_trials() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new("exact_recovery", vec![1, 2]);
    spec.output_path = Some(dir.path().to_path_buf());
    let first = run_experiment(&spec, &RunOptions::default()).unwrap();
    spec.seeds = vec![1, 2, 3];
    let resumed = run_experiment(&spec, &RunOptions { threads: 1, resume: true }).unwrap();
    assert_eq!(resumed.resumed, 2);
    assert_eq!(resumed.records.len(), 3);
    for r in &first.records {
        let again = resumed.records.iter().find(|q| q.seed == r.seed).unwrap();
        assert_eq!(again.values, r.values);
    }
    let fresh = run_experiment(&ExperimentSpec { output_path: None, ..spec.clone() }, &RunOptions::default()).unwrap();
    assert_eq!(fresh.to_csv().unwrap(), resumed.to_csv().unwrap());
    assert_eq!(read_records(&dir.path().join("exact_recovery.csv")).unwrap().len(), 3);
}

#[test]
fn spec_round_trips_through_json() {
    let spec = ExperimentSpec::new("rate_fit", vec![4, 5])
        .with_param("eps", ParamValue::Real(0.1))
        .with_param("nMax", ParamValue::Int(400))
        .with_param("geometry", ParamValue::Text("line".into()));
    let js = serde_json::to_string(&spec).unwrap();
    assert!(js.contains("\"outputPath\""));
    let back: ExperimentSpec = serde_json::from_str(&js).unwrap();
    assert_eq!(back, spec);
}
