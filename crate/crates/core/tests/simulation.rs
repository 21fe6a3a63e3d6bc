use hawkes_spectral::analysis::{ks_p_value, ks_statistic};
use hawkes_spectral::covariance::{estimate_covariance, CovarianceConfig};
use hawkes_spectral::events::EventSeries;
use hawkes_spectral::kernels::{mean_intensity, BackgroundRate, KernelEntry, KernelSpec};
use hawkes_spectral::simulator::{intensity_trace, simulate, SimConfig};

fn exp(alpha: f64, beta: f64) -> KernelEntry {
    KernelEntry::Exponential { alpha, beta }
}

fn unit_exponential_p(sample: &[f64]) -> f64 {
    ks_p_value(ks_statistic(sample, |x| 1.0 - (-x).exp()), sample.len())
}

fn from_zero(horizon: f64, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(horizon, seed);
    cfg.burn_in = Some(0.0);
    cfg
}

#[test]
fn exponential_rate_matches_mean_intensity() {
    let spec = KernelSpec::scalar(exp(0.5, 2.0)).unwrap();
    let mu = BackgroundRate::new(vec![1.0]).unwrap();
    let lambda = mean_intensity(&spec, &mu).unwrap().lambda_bar[0];
    assert!((lambda - 4.0 / 3.0).abs() < 1e-12);
    let sim = simulate(&spec, &mu, &SimConfig::new(1e5, 3)).unwrap();
    let rate = sim.events.total_events() as f64 / 1e5;
    assert!((rate / lambda - 1.0).abs() < 0.02, "rate {rate}");
}

#[test]
fn poisson_gaps_are_exponential() {
    let spec = KernelSpec::scalar(KernelEntry::Zero).unwrap();
    let mu = BackgroundRate::new(vec![2.0]).unwrap();
    let sim = simulate(&spec, &mu, &SimConfig::new(1000.0, 5)).unwrap();
    let t = &sim.events.events[0];
    let gaps: Vec<f64> = t.windows(2).map(|w| 2.0 * (w[1] - w[0])).collect();
    assert!(unit_exponential_p(&gaps) > 0.01);
}

#[test]
fn poisson_lag_zero_covariance_is_the_rate() {
    let spec = KernelSpec::scalar(KernelEntry::Zero).unwrap();
    let mu = BackgroundRate::new(vec![2.0]).unwrap();
    let sim = simulate(&spec, &mu, &SimConfig::new(1e5, 9)).unwrap();
    let cov = estimate_covariance(&sim.events, &CovarianceConfig::new(0.01, 0.5)).unwrap();
    let v0 = cov.get(0, 0, 0);
    assert!((v0 / 2.0 - 1.0).abs() < 0.05, "v0 {v0}");
    for k in 1..=cov.lags as isize {
        assert!(cov.get(k, 0, 0).abs() < 0.01);
    }
}

#[test]
fn exponential_time_rescaling_from_trace() {
    let spec = KernelSpec::scalar(exp(0.5, 2.0)).unwrap();
    let mu = BackgroundRate::new(vec![1.0]).unwrap();
    let sim = simulate(&spec, &mu, &from_zero(2000.0, 11)).unwrap();
    let step = 5e-4;
    let trace = intensity_trace(&spec, &mu, &sim.events, step).unwrap();
    let lam = &trace.values[0];
    // Trapezoid compensator on the grid, read off at each event.
    let mut cum = vec![0.0; lam.len()];
    for k in 1..lam.len() {
        cum[k] = cum[k - 1] + 0.5 * step * (lam[k - 1] + lam[k]);
    }
    let at = |t: f64| {
        let x = (t - trace.t0) / step;
        let k = (x.floor() as usize).min(lam.len() - 2);
        cum[k] + (x - k as f64) * (cum[k + 1] - cum[k])
    };
    let comp: Vec<f64> = sim.events.events[0].iter().map(|&t| at(t)).collect();
    let gaps: Vec<f64> = comp.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps.len() > 2000);
    assert!(unit_exponential_p(&gaps) > 0.01);
}

/// Exact compensator `∫_0^t λ^i` for power-law kernels.
fn power_law_compensator(spec: &KernelSpec, mu: &[f64], events: &EventSeries, i: usize, t: f64) -> f64 {
    let mut total = mu[i] * t;
    for (j, times) in events.events.iter().enumerate() {
        if let KernelEntry::PowerLaw { alpha, beta, gamma } = *spec.entry(i, j) {
            let p = beta + 1.0;
            for &s in times.iter().take_while(|&&s| s < t) {
                total += alpha / p * ((t - s + gamma).powf(p) - gamma.powf(p));
            }
        }
    }
    total
}

#[test]
fn power_law_time_rescaling_is_exact() {
    // Long memory keeps every event in the history, so the cached-bound path
    // and its refreshes are exercised throughout.
    let diag = KernelEntry::PowerLaw { alpha: 0.4 * 0.5 * 0.02f64.powf(0.5), beta: -1.5, gamma: 0.02 };
    let anti = KernelEntry::PowerLaw { alpha: 0.3 * 0.5 * 0.05f64.powf(0.5), beta: -1.5, gamma: 0.05 };
    let spec = KernelSpec::new(vec![vec![diag.clone(), anti.clone()], vec![anti, diag]]).unwrap();
    let mu = vec![0.5, 0.5];
    let sim = simulate(&spec, &BackgroundRate::new(mu.clone()).unwrap(), &from_zero(1500.0, 2)).unwrap();
    assert!(sim.meta.history_cutoff.iter().flatten().all(|c| c.unwrap() > 1500.0));
    for i in 0..2 {
        let comp: Vec<f64> =
            sim.events.events[i].iter().map(|&t| power_law_compensator(&spec, &mu, &sim.events, i, t)).collect();
        let gaps: Vec<f64> = comp.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(gaps.len() > 1000, "component {i}: {} events", comp.len());
        assert!(unit_exponential_p(&gaps) > 0.01, "component {i}");
    }
}

#[test]
fn power_law_simulation_is_deterministic() {
    let spec = KernelSpec::scalar(KernelEntry::PowerLaw { alpha: 0.1, beta: -1.5, gamma: 0.05 }).unwrap();
    let mu = BackgroundRate::new(vec![1.0]).unwrap();
    let a = simulate(&spec, &mu, &SimConfig::new(3000.0, 4)).unwrap();
    let b = simulate(&spec, &mu, &SimConfig::new(3000.0, 4)).unwrap();
    assert_eq!(a.events, b.events);
    assert_eq!(a.meta.accepted, b.meta.accepted);
}
