use std::path::Path;
use std::process::{Command, Output};

use hawkes_spectral::covariance::{estimate_covariance, CovarianceConfig};
use hawkes_spectral::io::{parse_events, write_kernel};
use hawkes_spectral::spectral::estimate_kernel_1d;

const EXP_SPEC: &str = r#"{"n": 1, "entries": [[{"type": "exp", "alpha": 1.0, "beta": 4.0}]], "mu": [1.0]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hawkes-spectral")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_pipeline_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = dir.path().join("run");
    ok(&["simulate", "--kernel-spec", EXP_SPEC, "--horizon", "2000", "--seed", "3", "--out", s(&sim)]);
    let events = sim.join("events.csv");
    ok(&["pipeline", "--input", s(&events), "--delta", "0.05", "--tau-max", "1", "--min-events", "10", "--out", s(&out)]);

    let parsed = parse_events(&events, Some(1)).unwrap();
    let cov = estimate_covariance(&parsed.series, &CovarianceConfig::new(0.05, 1.0)).unwrap();
    let direct = dir.path().join("direct.csv");
    write_kernel(&direct, &estimate_kernel_1d(&cov, cov.lambda_bar[0]).unwrap()).unwrap();
    assert_eq!(std::fs::read(&direct).unwrap(), std::fs::read(out.join("kernel.csv")).unwrap());
    assert!(out.join("diagnostics.json").exists());
}

#[test]
fn staged_commands_agree_with_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--kernel-spec", EXP_SPEC, "--horizon", "2000", "--seed", "4", "--out", s(&sim)]);
    let events = sim.join("events.csv");
    let grid = ["--delta", "0.05", "--tau-max", "1"];
    let cov = dir.path().join("cov");
    let est = dir.path().join("est");
    let fit = dir.path().join("fit");
    let all = dir.path().join("all");
    ok(&[&["cov", "--input", s(&events), "--out", s(&cov)][..], &grid].concat());
    ok(&["estimate", "--input", s(&cov.join("covariance.csv")), "--out", s(&est)]);
    ok(&["fit", "--input", s(&est.join("kernel.csv")), "--out", s(&fit)]);
    ok(&[&["pipeline", "--input", s(&events), "--fit-range", "0.1:0.5", "--out", s(&all)][..], &grid].concat());

    assert_eq!(std::fs::read(est.join("kernel.csv")).unwrap(), std::fs::read(all.join("kernel.csv")).unwrap());
    // The default fit range on this grid is 2Δ to τmax/2.
    assert_eq!(std::fs::read(fit.join("fit.json")).unwrap(), std::fs::read(all.join("fit.json")).unwrap());
}

#[test]
fn validation_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unstable = r#"{"n": 1, "entries": [[{"type": "exp", "alpha": 8.0, "beta": 4.0}]], "mu": [1.0]}"#;
    let out = run(&["simulate", "--kernel-spec", unstable, "--horizon", "10", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stationar"));

    let events = dir.path().join("events.csv");
    std::fs::write(&events, "component,timestamp\n1,0.5\n1,0.25\n2,0.75\n").unwrap();
    let out = run(&["pipeline", "--input", s(&events), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("load"), "{err}");

    std::fs::write(&events, "component,timestamp\n1,0.5\n1,0.75\n").unwrap();
    let out = run(&["pipeline", "--input", s(&events), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["fit", "--input", s(&dir.path().join("missing.csv")), "--out", s(dir.path())]);
    assert_ne!(out.status.code(), Some(0));

    let out = run(&["pipeline", "--input", s(&events), "--fit-range", "0.5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2), "clap usage errors also exit with 2");
}

#[test]
fn pointwise_study_writes_qq_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "errors", "--kernel-spec", EXP_SPEC, "--study", "pointwise", "--horizons", "2000", "--seeds", "8",
        "--delta", "0.05", "--tau-max", "1", "--t-values", "0.1,0.5", "--out", s(dir.path()),
    ]);
    let qq = std::fs::read_to_string(dir.path().join("qq.csv")).unwrap();
    assert_eq!(qq.lines().next(), Some("t,empirical,normal"));
    assert_eq!(qq.lines().count(), 1 + 2 * 8);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pointwise.json")).unwrap()).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 2);
}

#[test]
fn prices_run_through_the_bisymmetric_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let spec = r#"{"n": 2, "entries": [[{"type": "exp", "alpha": 0.5, "beta": 8.0}, {"type": "exp", "alpha": 1.0, "beta": 4.0}],
                              [{"type": "exp", "alpha": 1.0, "beta": 4.0}, {"type": "exp", "alpha": 0.5, "beta": 8.0}]],
                   "mu": [1.0, 1.0]}"#;
    ok(&["simulate", "--kernel-spec", spec, "--horizon", "3000", "--seed", "2", "--out", s(&sim)]);

    // Rebuild a mid-price path from the up and down events.
    let parsed = parse_events(&sim.join("events.csv"), Some(2)).unwrap();
    let mut price = 100.0;
    let mut csv = String::from("timestamp,price\n0,100\n");
    for (c, t) in parsed.series.merged() {
        price += if c == 0 { 0.01 } else { -0.01 };
        csv.push_str(&format!("{t},{price:.2}\n"));
    }
    let prices = dir.path().join("prices.csv");
    std::fs::write(&prices, csv).unwrap();

    let out = dir.path().join("out");
    let base = ["pipeline", "--input", s(&prices), "--input-kind", "prices", "--delta", "0.05", "--tau-max", "1"];
    ok(&[&base[..], &["--mode", "2d-bisym", "--out", s(&out)]].concat());
    let header = std::fs::read_to_string(out.join("kernel.csv")).unwrap();
    assert!(header.starts_with("t,phi11,phi12\n"));

    let out = run(&[&base[..], &["--out", s(&dir.path().join("bad"))]].concat());
    assert_eq!(out.status.code(), Some(2));
}
