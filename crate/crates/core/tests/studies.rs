use hawkes_spectral::analysis::{convergence_study, delta_sweep, powerlaw_fit};
use hawkes_spectral::covariance::CovarianceConfig;
use hawkes_spectral::kernels::{BackgroundRate, KernelEntry, KernelSpec};

fn spec() -> KernelSpec {
    KernelSpec::scalar(KernelEntry::Exponential { alpha: 1.0, beta: 4.0 }).unwrap()
}

fn mu() -> BackgroundRate {
    BackgroundRate::new(vec![1.0]).unwrap()
}

#[test]
fn delta_sweep_minimum_is_interior() {
    let deltas = [0.01, 0.05, 0.1, 0.15, 0.3, 0.6];
    let seeds: Vec<u64> = (1..=10).collect();
    let sweep = delta_sweep(&spec(), &mu(), 1e5, &deltas, 2.0, &seeds).unwrap();
    let table: Vec<String> = sweep.rows.iter().map(|r| format!("{}: {:.3e}", r.delta, r.e2_mean)).collect();
    assert!((0.05..=0.3).contains(&sweep.argmin_delta), "argmin {} in {table:?}", sweep.argmin_delta);
    assert!(sweep.rows.iter().flat_map(|r| &r.e2_per_seed).all(|&e| e > 0.0));
}

#[test]
fn delta_sweep_single_delta_is_its_own_argmin() {
    let sweep = delta_sweep(&spec(), &mu(), 2000.0, &[0.1], 2.0, &[1]).unwrap();
    assert_eq!(sweep.argmin_delta, 0.1);
    assert_eq!(sweep.rows.len(), 1);
}

#[test]
fn error_falls_tenfold_per_decade_of_length() {
    let cfg = CovarianceConfig::new(0.01, 2.0);
    let seeds: Vec<u64> = (1..=5).collect();
    let study = convergence_study(&spec(), &mu(), &[1e4, 1e5], &seeds, &cfg).unwrap();
    let mean = |t: f64| {
        let e: Vec<f64> = study.points.iter().filter(|p| p.horizon == t).map(|p| p.e2).collect();
        e.iter().sum::<f64>() / e.len() as f64
    };
    let ratio = mean(1e4) / mean(1e5);
    assert!((5.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn convergence_rejects_short_horizons() {
    let cfg = CovarianceConfig::new(0.01, 2.0);
    assert!(convergence_study(&spec(), &mu(), &[3.0, 1e3], &[1], &cfg).is_err());
}

#[test]
fn powerlaw_fit_separates_exponential_decay() {
    let t: Vec<f64> = (1..=100).map(|k| k as f64 * 0.1).collect();
    let pl: Vec<f64> = t.iter().map(|x| 0.1 * x.powf(-1.05)).collect();
    let ex: Vec<f64> = t.iter().map(|x| (-x).exp()).collect();
    let a = powerlaw_fit(&t, &pl, 0.5, 5.0).unwrap();
    let b = powerlaw_fit(&t, &ex, 0.5, 5.0).unwrap();
    assert!((a.alpha - 0.1).abs() < 1e-10 && (a.beta + 1.05).abs() < 1e-10);
    assert!(a.residual_rms < 1e-10);
    assert!(b.residual_rms > 0.1, "rms {}", b.residual_rms);
}
