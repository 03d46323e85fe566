use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use robust_ot::privacy::{PufferfishFramework, SecretPair};
use robust_ot::sampling::gaussian;
use robust_ot::DiscreteMeasure;
use robust_ot_harness::fixtures::elbow_fixture;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-ot"))
        .args(args)
        .env_remove("ROBUST_OT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value(out: &Output) -> f64 {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    stdout(out).trim().parse().unwrap()
}

fn write(dir: &Path, name: &str, m: &DiscreteMeasure) -> PathBuf {
    let path = dir.join(name);
    m.write(&path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn line(points: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::from_1d(points, vec![1.0 / points.len() as f64; points.len()]).unwrap()
}

#[test]
fn identical_files_at_zero_radius_print_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", &gaussian(12, 2, 0.0, 1.0, 4).unwrap());
    let out = run(&["compute", s(&mu), s(&mu), "--p", "2", "--eps", "0"]);
    assert_eq!(value(&out), 0.0);
}

#[test]
fn two_point_fixture_prints_one() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.csv", &line(&[0.0, 1.0]));
    let nu = write(dir.path(), "nu.csv", &line(&[2.0, 3.0]));
    let out = run(&["compute", s(&mu), s(&nu), "--p", "1", "--eps", "0.5"]);
    assert_eq!(stdout(&out), "1.0\n");
    // without trimming the distance is 2
    assert_eq!(value(&run(&["compute", s(&mu), s(&nu), "--p", "1"])), 2.0);
}

#[test]
fn variants_order_as_expected() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", &gaussian(10, 1, 0.0, 1.0, 1).unwrap());
    let nu = write(dir.path(), "nu.json", &gaussian(10, 1, 3.0, 1.0, 2).unwrap());
    let base = ["compute", s(&mu), s(&nu), "--p", "1"];
    let with = |extra: &[&str]| value(&run(&[&base[..], extra].concat()));
    let plain = with(&[]);
    let robust = with(&["--eps", "0.2"]);
    let one_sided = with(&["--eps", "0.2", "--one-sided"]);
    let asym = with(&["--eps-mu", "0.2", "--eps-nu", "0.1"]);
    assert!(robust <= plain + 1e-9);
    assert!(one_sided >= robust - 1e-9);
    assert!(asym.is_finite());
    let tv = with(&["--eps", "0.2", "--tv-variant"]);
    assert!(tv.is_finite() && tv >= 0.0);
    let winf = value(&run(&["compute", s(&mu), s(&nu), "--p", "inf", "--eps", "0.2"]));
    assert!(winf >= robust - 1e-9);
}

#[test]
fn plan_out_reproduces_the_printed_value() {
    let dir = tempfile::tempdir().unwrap();
    let a = gaussian(15, 2, 0.0, 1.0, 7).unwrap();
    let b = gaussian(11, 2, 1.0, 1.0, 8).unwrap();
    let mu = write(dir.path(), "mu.json", &a);
    let nu = write(dir.path(), "nu.json", &b);
    let plan_path = dir.path().join("plan.json");
    let printed = value(&run(&["compute", s(&mu), s(&nu), "--p", "2", "--eps", "0.2", "--plan-out", s(&plan_path)]));
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plan_path).unwrap()).unwrap();
    let mut power = 0.0;
    for e in plan["coupling"].as_array().unwrap() {
        let (i, j, m) = (e[0].as_u64().unwrap() as usize, e[1].as_u64().unwrap() as usize, e[2].as_f64().unwrap());
        let d2: f64 = a.point(i).iter().zip(b.point(j)).map(|(x, y)| (x - y) * (x - y)).sum();
        power += m * d2;
    }
    assert!((power.sqrt() - printed).abs() <= 1e-9, "{} vs {printed}", power.sqrt());
}

#[test]
fn custom_distance_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.csv", &line(&[0.0, 1.0]));
    let nu = write(dir.path(), "nu.csv", &line(&[0.0, 1.0]));
    let costs = dir.path().join("d.csv");
    // swapping the atoms is free, keeping them costs 5
    std::fs::write(&costs, "5,0\n0,5\n").unwrap();
    let out = run(&["compute", s(&mu), s(&nu), "--p", "1", "--distances", s(&costs)]);
    assert_eq!(value(&out), 0.0);
}

#[test]
fn dual_certificates_close_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", &gaussian(9, 2, 0.0, 1.0, 3).unwrap());
    let nu = write(dir.path(), "nu.json", &gaussian(8, 2, 0.5, 1.0, 5).unwrap());
    let cert_path = dir.path().join("cert.json");
    for method in ["flow", "ascent"] {
        let out = run(&["dual", s(&mu), s(&nu), "--p", "1", "--eps", "0.1", "--method", method, "--certificate-out", s(&cert_path)]);
        assert!(out.status.success());
        let cert: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert_path).unwrap()).unwrap();
        for key in ["f", "g", "penalty", "primalPower", "gap"] {
            assert!(cert.get(key).is_some(), "{method}: missing {key}");
        }
        let gap = cert["gap"].as_f64().unwrap() / cert["primalPower"].as_f64().unwrap();
        let tol = if method == "flow" { 1e-8 } else { 1e-3 };
        assert!(gap <= tol, "{method}: relative gap {gap}");
        assert!(stdout(&out).starts_with("objective "));
    }
}

#[test]
fn elbow_recovers_the_fixture_level() {
    let dir = tempfile::tempdir().unwrap();
    let fx = elbow_fixture(3, 20, 0.1, 100.0).unwrap();
    let mu = write(dir.path(), "mu.json", &fx.mu_tilde);
    let nu = write(dir.path(), "nu.json", &fx.nu_tilde);
    let out_dir = dir.path().join("elbow");
    let out = run(&["elbow", s(&mu), s(&nu), "--p", "1", "--out", s(&out_dir), "--threads", "2"]);
    assert!(out.status.success());
    let js: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("elbow.json")).unwrap()).unwrap();
    let eps_hat = js["epsHat"].as_f64().unwrap();
    assert!((0.08..=0.12).contains(&eps_hat), "epsHat {eps_hat}");
    let csv = std::fs::read_to_string(out_dir.join("elbow.csv")).unwrap();
    assert!(csv.starts_with("delta,curve,slope\n"));
    assert_eq!(csv.lines().count(), 27);
}

fn small_framework(dir: &Path) -> PathBuf {
    let fw = PufferfishFramework {
        pairs: vec![SecretPair {
            label_s: "low".into(),
            label_t: "high".into(),
            dist_s: DiscreteMeasure::from_1d(&[0.0, 1.0, 50.0], vec![0.49, 0.49, 0.02]).unwrap(),
            dist_t: DiscreteMeasure::from_1d(&[1.0, 2.0], vec![0.5, 0.5]).unwrap(),
        }],
        eps_priv: 1.0,
        delta_priv: 0.05,
    };
    let path = dir.join("framework.json");
    std::fs::write(&path, fw.to_json_string()).unwrap();
    path
}

#[test]
fn privacy_report_and_release() {
    let dir = tempfile::tempdir().unwrap();
    let fw = small_framework(dir.path());
    let report: serde_json::Value = serde_json::from_str(&stdout(&run(&["privacy", s(&fw)]))).unwrap();
    assert!((report["wDelta"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(report["noiseScale"], report["wDelta"]);

    let out_path = dir.path().join("report.json");
    let release = |seed: &str| run(&["privacy", s(&fw), "--release", "10", "--seed", seed, "--out", s(&out_path)]);
    let a = release("9");
    assert_eq!(a.stdout, release("9").stdout);
    assert_ne!(a.stdout, release("10").stdout);
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(saved["sampleSeed"], 10);
    // --release needs --seed
    assert_eq!(run(&["privacy", s(&fw), "--release", "1"]).status.code(), Some(2));
}

#[test]
fn output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", &gaussian(20, 3, 0.0, 1.0, 11).unwrap());
    let nu = write(dir.path(), "nu.json", &gaussian(20, 3, 0.3, 2.0, 12).unwrap());
    let args = ["compute", s(&mu), s(&nu), "--p", "2", "--eps", "0.15"];
    let first = run(&args);
    assert!(first.status.success());
    for _ in 0..3 {
        assert_eq!(run(&args).stdout, first.stdout);
    }
    let text = stdout(&first);
    assert!(text.ends_with('\n') && !text.contains('\r'));
    // twelve significant digits at most
    let digits = text.trim().trim_start_matches("0.").chars().filter(char::is_ascii_digit).count();
    assert!(digits <= 12, "{text}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.csv", &line(&[0.0, 1.0]));
    let conflict = run(&["compute", s(&mu), s(&mu), "--eps", "0.1", "--eps-mu", "0.2"]);
    assert_eq!(conflict.status.code(), Some(2));
    let bad_eps = run(&["compute", s(&mu), s(&mu), "--eps", "1.5", "--json-errors"]);
    assert_eq!(bad_eps.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&bad_eps.stderr).unwrap();
    assert_eq!(err["error"], "usage");
    assert_eq!(err["exitCode"], 2);
    assert_eq!(run(&["compute", s(&mu), s(&mu), "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let parse = run(&["compute", "--json-errors"]);
    assert_eq!(parse.status.code(), Some(2));
    assert!(serde_json::from_slice::<serde_json::Value>(&parse.stderr).is_ok());
}

#[test]
fn solve_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.csv", &line(&[0.0, 1.0]));
    let missing = dir.path().join("absent.json");
    let out = run(&["compute", s(&mu), s(&missing), "--json-errors"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exitCode"], 1);
}

#[test]
fn convert_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = gaussian(6, 2, 0.0, 1.0, 21).unwrap();
    let csv = write(dir.path(), "m.csv", &m);
    let json = dir.path().join("m.json");
    let back = dir.path().join("back.csv");
    assert!(run(&["convert", s(&csv), s(&json)]).status.success());
    assert!(run(&["convert", s(&json), s(&back)]).status.success());
    assert_eq!(DiscreteMeasure::read(&json).unwrap(), DiscreteMeasure::read(&csv).unwrap());
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&back).unwrap());
}

#[test]
fn experiment_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("runs");
    let out = run(&["experiment", "--name", "sandwich_tv", "--seeds", "0..4", "--out", s(&out_dir), "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS ")));
    assert!(out_dir.join("sandwich_tv.csv").exists());
    assert!(out_dir.join("sandwich_tv.json").exists());

    let resumed = run(&["experiment", "--name", "sandwich_tv", "--seeds", "0..=3", "--out", s(&out_dir), "--resume"]);
    assert_eq!(resumed.stdout, out.stdout);

    let unknown = run(&["experiment", "--name", "nope", "--seeds", "1", "--out", s(&out_dir)]);
    assert_eq!(unknown.status.code(), Some(2));
    let bad_param = run(&["experiment", "--name", "elbow", "--seeds", "1", "--out", s(&out_dir), "--param", "colour=3"]);
    assert_eq!(bad_param.status.code(), Some(2));
}
