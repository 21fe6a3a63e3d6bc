use std::path::{Path, PathBuf};

use hawkes_spectral::analysis::relative_l2_error;
use hawkes_spectral::covariance::CovarianceConfig;
use hawkes_spectral::events::EventSeries;
use hawkes_spectral::io::{write_events, DayWindow};
use hawkes_spectral::kernels::{BackgroundRate, KernelEntry, KernelSpec};
use hawkes_spectral::pipeline::{run_pipeline, Mode, RunConfig};
use hawkes_spectral::simulator::{simulate, SimConfig};

fn exp(alpha: f64, beta: f64) -> KernelEntry {
    KernelEntry::Exponential { alpha, beta }
}

/// Simulated days of `length` seconds laid out 1e5 s apart, plus their windows file.
fn write_days(dir: &Path, spec: &KernelSpec, length: f64, seeds: &[u64]) -> (PathBuf, PathBuf) {
    let mu = BackgroundRate::new(vec![1.0; spec.n]).unwrap();
    let mut all = vec![Vec::new(); spec.n];
    let mut windows = Vec::new();
    for (d, &seed) in seeds.iter().enumerate() {
        let sim = simulate(spec, &mu, &SimConfig::new(length, seed)).unwrap();
        let offset = d as f64 * 1e5;
        for (c, times) in sim.events.events.iter().enumerate() {
            all[c].extend(times.iter().map(|t| t + offset));
        }
        windows.push(DayWindow { label: format!("day{seed}"), start: offset, end: offset + length });
    }
    let events = EventSeries::new(all, 0.0, seeds.len() as f64 * 1e5).unwrap();
    let ev = dir.join(format!("events{}.csv", seeds.len()));
    let win = dir.join(format!("windows{}.json", seeds.len()));
    write_events(&ev, &events).unwrap();
    std::fs::write(&win, serde_json::to_string(&windows).unwrap()).unwrap();
    (ev, win)
}

#[test]
fn bisymmetric_days_recover_both_kernels() {
    let diag = exp(0.5, 8.0);
    let anti = exp(1.0, 4.0);
    let spec = KernelSpec::bisymmetric(diag.clone(), anti.clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let seeds: Vec<u64> = (1..=10).collect();
    let (ev, win) = write_days(dir.path(), &spec, 5000.0, &seeds);
    let mut cfg = RunConfig::new(&ev, dir.path().join("out"), CovarianceConfig::new(0.05, 2.0), Mode::TwoDBisym);
    cfg.windows = Some(win);
    let res = run_pipeline(&cfg).unwrap();

    assert_eq!(res.days.len(), 10);
    for day in &res.days {
        assert!(day.imbalance.abs() < 0.1, "{}: imbalance {}", day.label, day.imbalance);
    }
    let (diag_dev, anti_dev) = res.bisymmetry.unwrap();
    assert!(diag_dev < 0.05 && anti_dev < 0.05, "bisymmetry {diag_dev} {anti_dev}");
    let lambda = 1.0 / (1.0 - diag.integral() - anti.integral());
    assert!((res.lambda_bar / lambda - 1.0).abs() < 0.03, "lambda_bar {}", res.lambda_bar);
    for (name, truth) in [("phi11", &diag), ("phi12", &anti)] {
        let col = res.kernel.column(name).unwrap();
        let err = relative_l2_error(col, truth, 0.05, 2.0).unwrap();
        assert!(err < 0.3, "{name}: relative error {err}");
    }
}

#[test]
fn short_days_are_dropped_without_changing_the_estimate() {
    let spec = KernelSpec::scalar(exp(1.0, 4.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let grid = CovarianceConfig::new(0.1, 2.0);

    let (ev, win) = write_days(dir.path(), &spec, 2000.0, &[1, 2, 3]);
    let mut cfg = RunConfig::new(&ev, dir.path().join("a"), grid, Mode::OneD);
    cfg.windows = Some(win);
    let three = run_pipeline(&cfg).unwrap();

    // A fourth day far below the event threshold.
    let (ev, win) = write_days(dir.path(), &spec, 2000.0, &[1, 2, 3, 4]);
    let mut windows: Vec<DayWindow> = serde_json::from_str(&std::fs::read_to_string(&win).unwrap()).unwrap();
    windows[3].end = windows[3].start + 5.0;
    std::fs::write(&win, serde_json::to_string(&windows).unwrap()).unwrap();
    let mut cfg = RunConfig::new(&ev, dir.path().join("b"), grid, Mode::OneD);
    cfg.windows = Some(win);
    let four = run_pipeline(&cfg).unwrap();

    assert_eq!(four.dropped.len(), 1);
    assert_eq!(four.days.len(), 3);
    assert_eq!(three.covariance, four.covariance);
    assert_eq!(three.kernel.columns, four.kernel.columns);
}

#[test]
fn reruns_are_byte_identical() {
    let spec = KernelSpec::scalar(exp(1.0, 4.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (ev, win) = write_days(dir.path(), &spec, 3000.0, &[5, 6]);
    let mut outputs = Vec::new();
    for name in ["x", "y"] {
        let mut cfg = RunConfig::new(&ev, dir.path().join(name), CovarianceConfig::new(0.05, 1.0), Mode::OneD);
        cfg.windows = Some(win.clone());
        cfg.fit_range = Some((0.1, 0.5));
        run_pipeline(&cfg).unwrap();
        let read = |f: &str| std::fs::read(cfg.out_dir.join(f)).unwrap();
        outputs.push((read("covariance.csv"), read("kernel.csv"), read("fit.json")));
    }
    assert_eq!(outputs[0], outputs[1]);
}
