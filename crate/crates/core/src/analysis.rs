//! Error and fit studies on estimated kernels: L² error, convergence in `T`,
//! pointwise error normality, power-law fits and the Δ sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::covariance::{estimate_covariance, CovarianceConfig};
use crate::error::{HawkesError, Result};
use crate::kernels::{BackgroundRate, KernelEntry, KernelSpec};
use crate::simulator::{simulate, SimConfig};
use crate::spectral::estimate_kernel_1d;

/// `e² = Σ_{k=1}^{K} (est_k - φ(kΔ))²`; `est` holds samples at `t = 0..=K·Δ`.
pub fn l2_error(est: &[f64], truth: &KernelEntry, delta: f64, tau_max: f64) -> Result<f64> {
    let truth = truth_samples(truth, delta, tau_max, est.len())?;
    Ok(sum_sq_diff(est, &truth))
}

/// `sqrt(e² / Σ_{k=1}^{K} φ(kΔ)²)`.
pub fn relative_l2_error(est: &[f64], truth: &KernelEntry, delta: f64, tau_max: f64) -> Result<f64> {
    let truth = truth_samples(truth, delta, tau_max, est.len())?;
    let norm: f64 = truth.iter().skip(1).map(|x| x * x).sum();
    if norm == 0.0 {
        return Err(HawkesError::invalid("relative error against a zero kernel"));
    }
    Ok((sum_sq_diff(est, &truth) / norm).sqrt())
}

fn truth_samples(truth: &KernelEntry, delta: f64, tau_max: f64, len: usize) -> Result<Vec<f64>> {
    if !(delta > 0.0 && tau_max >= delta) {
        return Err(HawkesError::invalid(format!("bad grid (delta {delta}, tau_max {tau_max})")));
    }
    let lags = (tau_max / delta).round() as usize;
    if len != lags + 1 {
        return Err(HawkesError::GridMismatch(format!(
            "estimate has {len} samples, grid t = 0..={tau_max} step {delta} has {}",
            lags + 1
        )));
    }
    Ok((0..len).map(|k| truth.value(k as f64 * delta)).collect())
}

fn sum_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).skip(1).map(|(x, y)| (x - y).powi(2)).sum()
}

fn scalar_entry(spec: &KernelSpec) -> Result<&KernelEntry> {
    if spec.n != 1 {
        return Err(HawkesError::Dimension { expected: 1, got: spec.n });
    }
    Ok(spec.entry(0, 0))
}

/// Simulate, estimate the covariance and the 1D kernel; returns the kernel samples.
fn estimate_from_simulation(
    spec: &KernelSpec,
    mu: &BackgroundRate,
    horizon: f64,
    seed: u64,
    cfg: &CovarianceConfig,
) -> Result<Vec<f64>> {
    let sim = simulate(spec, mu, &SimConfig::new(horizon, seed))?;
    let cov = estimate_covariance(&sim.events, cfg)?;
    let est = estimate_kernel_1d(&cov, cov.lambda_bar[0])?;
    Ok(est.columns.into_iter().next().expect("scalar estimate has one column").1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub e2: f64,
    pub seed: u64,
}

/// Ordinary least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// RMS of the residuals.
    pub residual_rms: f64,
    pub points: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(HawkesError::invalid("fit_line: x and y lengths differ"));
    }
    if n < 2 {
        return Err(HawkesError::invalid("fit_line needs at least 2 points"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HawkesError::invalid("fit_line: all x values are equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if n > 2 { (ss / (n - 2) as f64 / sxx).sqrt() } else { f64::NAN };
    Ok(LineFit { slope, intercept, slope_stderr, residual_rms: (ss / n as f64).sqrt(), points: n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub points: Vec<ConvergencePoint>,
    /// Fit of `ln e²` on `ln T` over all points, equal weights.
    pub fit: LineFit,
}

/// Log-log slope fit of convergence points.
pub fn convergence_slope(points: &[ConvergencePoint]) -> Result<LineFit> {
    if let Some(p) = points.iter().find(|p| !(p.e2 > 0.0)) {
        return Err(HawkesError::numerical(format!("e² = {} at T = {} cannot be log-fitted", p.e2, p.horizon)));
    }
    let x: Vec<f64> = points.iter().map(|p| p.horizon.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.e2.ln()).collect();
    fit_line(&x, &y)
}

/// `simulate → estimate_covariance → estimate_kernel_1d → l2_error` for every
/// `(T, seed)`, then the log-log slope.
pub fn convergence_study(
    spec: &KernelSpec,
    mu: &BackgroundRate,
    horizons: &[f64],
    seeds: &[u64],
    cfg: &CovarianceConfig,
) -> Result<ConvergenceStudy> {
    let truth = scalar_entry(spec)?;
    cfg.validate()?;
    if let Some(&t) = horizons.iter().find(|&&t| t < 2.0 * (cfg.tau_max + cfg.h)) {
        return Err(HawkesError::invalid(format!("T = {t} is too short for tau_max = {}", cfg.tau_max)));
    }
    let tasks: Vec<(f64, u64)> = horizons.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
    let points = tasks
        .par_iter()
        .map(|&(horizon, seed)| {
            let est = estimate_from_simulation(spec, mu, horizon, seed, cfg)?;
            let e2 = l2_error(&est, truth, cfg.delta, cfg.tau_max)?;
            Ok(ConvergencePoint { horizon, e2, seed })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = convergence_slope(&points)?;
    Ok(ConvergenceStudy { points, fit })
}

/// Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the one-sample KS statistic `d` for sample size `n`
/// (Kolmogorov distribution with Stephens' small-sample correction).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `(empirical quantile, normal quantile)` pairs at plotting positions `(i - ½)/n`.
pub fn qq_pairs(sample: &[f64]) -> Vec<(f64, f64)> {
    let normal = Normal::standard();
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().map(|(i, &x)| (x, normal.inverse_cdf((i as f64 + 0.5) / n))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseErrors {
    pub t: f64,
    /// `φ^{(e)}_t - φ_t`, one per seed.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub variance: f64,
    /// `(error - mean) / sd`.
    pub standardized: Vec<f64>,
    pub qq: Vec<(f64, f64)>,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

/// Per-`t` estimation errors across seeds with normality diagnostics.
pub fn pointwise_error_samples(
    spec: &KernelSpec,
    mu: &BackgroundRate,
    cfg: &CovarianceConfig,
    horizon: f64,
    seeds: &[u64],
    t_values: &[f64],
) -> Result<Vec<PointwiseErrors>> {
    let truth = scalar_entry(spec)?;
    cfg.validate()?;
    if seeds.len() < 2 {
        return Err(HawkesError::invalid("pointwise errors need at least 2 seeds"));
    }
    let mut indices = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let k = (t / cfg.delta).round();
        if (k * cfg.delta - t).abs() > 1e-9 * cfg.delta.max(t) || k < 0.0 || k as usize > cfg.lags() {
            return Err(HawkesError::invalid(format!("t = {t} is not on the estimation grid (step {})", cfg.delta)));
        }
        indices.push(k as usize);
    }
    let estimates = seeds
        .par_iter()
        .map(|&seed| estimate_from_simulation(spec, mu, horizon, seed, cfg))
        .collect::<Result<Vec<_>>>()?;
    let normal = Normal::standard();
    Ok(t_values
        .iter()
        .zip(&indices)
        .map(|(&t, &k)| {
            let want = truth.value(k as f64 * cfg.delta);
            let errors: Vec<f64> = estimates.iter().map(|e| e[k] - want).collect();
            let n = errors.len() as f64;
            let mean = errors.iter().sum::<f64>() / n;
            let variance = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = variance.sqrt();
            let standardized: Vec<f64> =
                errors.iter().map(|e| if sd > 0.0 { (e - mean) / sd } else { 0.0 }).collect();
            let ks = ks_statistic(&standardized, |x| normal.cdf(x));
            PointwiseErrors {
                t,
                mean,
                std_error: sd / n.sqrt(),
                variance,
                qq: qq_pairs(&standardized),
                ks_statistic: ks,
                ks_p_value: ks_p_value(ks, errors.len()),
                standardized,
                errors,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub alpha: f64,
    pub beta: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// RMS of `ln φ - (ln α + β ln t)` over the points used.
    pub residual_rms: f64,
    pub points: usize,
    /// Samples in range that were `≤ 0` and left out of the log fit.
    pub excluded_nonpositive: usize,
}

/// Default fit range `[2Δ, τ_max/2]`.
pub fn default_fit_range(delta: f64, tau_max: f64) -> (f64, f64) {
    (2.0 * delta, 0.5 * tau_max)
}

/// Least-squares fit of `ln φ = ln α + β ln t` over samples with `t_lo ≤ t ≤ t_hi`.
pub fn powerlaw_fit(times: &[f64], values: &[f64], t_lo: f64, t_hi: f64) -> Result<FitReport> {
    if times.len() != values.len() {
        return Err(HawkesError::invalid("powerlaw_fit: times and values lengths differ"));
    }
    if !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(HawkesError::invalid(format!("fit range must satisfy 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]")));
    }
    let slack = 1e-9 * t_hi;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut excluded = 0;
    for (&t, &v) in times.iter().zip(values) {
        if t < t_lo - slack || t > t_hi + slack {
            continue;
        }
        if v > 0.0 {
            x.push(t.ln());
            y.push(v.ln());
        } else {
            excluded += 1;
        }
    }
    if x.len() < 3 {
        return Err(HawkesError::invalid(format!(
            "power-law fit on [{t_lo}, {t_hi}] has {} positive points, need 3 ({excluded} nonpositive excluded)",
            x.len()
        )));
    }
    if excluded > 0 {
        log::warn!("power-law fit: {excluded} nonpositive samples excluded");
    }
    let line = fit_line(&x, &y)?;
    Ok(FitReport {
        alpha: line.intercept.exp(),
        beta: line.slope,
        t_lo,
        t_hi,
        residual_rms: line.residual_rms,
        points: line.points,
        excluded_nonpositive: excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweepRow {
    pub delta: f64,
    /// `τ_max` rounded up to a multiple of this Δ.
    pub tau_max: f64,
    pub e2_per_seed: Vec<f64>,
    pub e2_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub rows: Vec<DeltaSweepRow>,
    pub argmin_delta: f64,
}

/// `e²(Δ)` with `h = Δ`, every Δ applied to the same simulated sample per seed.
pub fn delta_sweep(
    spec: &KernelSpec,
    mu: &BackgroundRate,
    horizon: f64,
    deltas: &[f64],
    tau_max: f64,
    seeds: &[u64],
) -> Result<DeltaSweep> {
    let truth = scalar_entry(spec)?;
    if deltas.is_empty() || seeds.is_empty() {
        return Err(HawkesError::invalid("delta sweep needs at least one delta and one seed"));
    }
    let cfgs: Vec<CovarianceConfig> = deltas
        .iter()
        .map(|&d| {
            if !(d > 0.0) {
                return Err(HawkesError::invalid(format!("delta must be > 0, got {d}")));
            }
            let cfg = CovarianceConfig::new(d, d * (tau_max / d - 1e-9).ceil().max(1.0));
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<_>>()?;
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let sim = simulate(spec, mu, &SimConfig::new(horizon, seed))?;
            cfgs.iter()
                .map(|cfg| {
                    let cov = estimate_covariance(&sim.events, cfg)?;
                    let est = estimate_kernel_1d(&cov, cov.lambda_bar[0])?;
                    l2_error(&est.columns[0].1, truth, cfg.delta, cfg.tau_max)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<DeltaSweepRow> = cfgs
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let e2_per_seed: Vec<f64> = per_seed.iter().map(|row| row[i]).collect();
            let e2_mean = e2_per_seed.iter().sum::<f64>() / e2_per_seed.len() as f64;
            DeltaSweepRow { delta: cfg.delta, tau_max: cfg.tau_max, e2_per_seed, e2_mean }
        })
        .collect();
    let argmin_delta = rows
        .iter()
        .min_by(|a, b| a.e2_mean.total_cmp(&b.e2_mean))
        .map(|r| r.delta)
        .expect("non-empty");
    Ok(DeltaSweep { rows, argmin_delta })
}
