//! The normalized covariance `v^{(h)}_τ = h^{-1} Cov(N_{t+h} - N_t, N_{t+h+τ} - N_{t+τ})`,
//! estimated from binned event counts or computed from a kernel.
//!
//! Entry `(i, j)` at lag `τ` pairs the count of component `i` in `[0, h)` with
//! the count of component `j` in `[τ, τ + h)`, so `v(-τ) = v(τ)ᵀ`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::events::EventSeries;
use crate::kernels::{psi_hat_from_phi_hat, BackgroundRate, CMatrix, KernelSpec, MeanIntensity};
use crate::spectral::g_hat;

/// Relative slack when checking that `tau_max` is a multiple of `delta`.
const GRID_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceConfig {
    /// Bin width, seconds.
    pub h: f64,
    /// Lag sampling period, seconds (`delta >= h / 2`).
    pub delta: f64,
    pub tau_max: f64,
}

impl CovarianceConfig {
    /// `h = Δ`, the usual choice.
    pub fn new(delta: f64, tau_max: f64) -> Self {
        CovarianceConfig { h: delta, delta, tau_max }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(HawkesError::invalid(format!("h must be > 0, got {}", self.h)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.5 * self.h) {
            return Err(HawkesError::invalid(format!(
                "delta must be >= h/2 (h = {}), got {}",
                self.h, self.delta
            )));
        }
        if !(self.tau_max.is_finite() && self.tau_max >= self.delta) {
            return Err(HawkesError::invalid(format!("tau_max must be >= delta, got {}", self.tau_max)));
        }
        let ratio = self.tau_max / self.delta;
        if (ratio - ratio.round()).abs() > GRID_SLACK * ratio.max(1.0) {
            return Err(HawkesError::invalid(format!(
                "tau_max ({}) must be a multiple of delta ({})",
                self.tau_max, self.delta
            )));
        }
        Ok(())
    }

    /// Number of positive lags `K = tau_max / delta`.
    pub fn lags(&self) -> usize {
        (self.tau_max / self.delta).round() as usize
    }
}

/// Real `n × n` matrices sampled at lags `kΔ`, `k = -K..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledMatrixFunction {
    pub n: usize,
    pub h: f64,
    pub delta: f64,
    /// `K`, the number of positive lags.
    pub lags: usize,
    /// Row-major `n × n` blocks for `k = -K..=K`.
    pub values: Vec<f64>,
    /// Mean intensity of the process the covariance describes.
    pub lambda_bar: Vec<f64>,
}

impl SampledMatrixFunction {
    pub fn zeros(n: usize, h: f64, delta: f64, lags: usize, lambda_bar: Vec<f64>) -> Self {
        SampledMatrixFunction { n, h, delta, lags, values: vec![0.0; (2 * lags + 1) * n * n], lambda_bar }
    }

    pub fn tau_max(&self) -> f64 {
        self.lags as f64 * self.delta
    }

    pub fn len(&self) -> usize {
        2 * self.lags + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    fn offset(&self, k: isize) -> usize {
        debug_assert!(k.unsigned_abs() <= self.lags);
        ((k + self.lags as isize) as usize) * self.n * self.n
    }

    pub fn get(&self, k: isize, i: usize, j: usize) -> f64 {
        self.values[self.offset(k) + i * self.n + j]
    }

    pub fn set(&mut self, k: isize, i: usize, j: usize, v: f64) {
        let o = self.offset(k);
        self.values[o + i * self.n + j] = v;
    }

    pub fn lag(&self, k: isize) -> f64 {
        k as f64 * self.delta
    }

    pub fn matrix(&self, k: isize) -> DMatrix<f64> {
        let o = self.offset(k);
        DMatrix::from_row_slice(self.n, self.n, &self.values[o..o + self.n * self.n])
    }

    /// Entry `(i, j)` over all lags `-K..=K`.
    pub fn series(&self, i: usize, j: usize) -> Vec<f64> {
        (-(self.lags as isize)..=self.lags as isize).map(|k| self.get(k, i, j)).collect()
    }

    pub fn same_grid(&self, other: &SampledMatrixFunction) -> bool {
        self.n == other.n
            && self.lags == other.lags
            && (self.h - other.h).abs() <= GRID_SLACK * self.h
            && (self.delta - other.delta).abs() <= GRID_SLACK * self.delta
    }

    /// Largest `|v(-kΔ) - v(kΔ)ᵀ|`.
    pub fn transpose_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..=self.lags as isize {
            for i in 0..self.n {
                for j in 0..self.n {
                    worst = worst.max((self.get(-k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }
}

/// `Λ̂^i = count_i / (t_end - t_start)`.
pub fn estimate_mean_intensity(events: &EventSeries) -> Result<MeanIntensity> {
    let len = events.duration();
    if !(len > 0.0) {
        return Err(HawkesError::invalid("empty observation window"));
    }
    let lambda_bar = (0..events.n)
        .map(|i| {
            if events.count(i) == 0 {
                log::warn!("component {} has no events; its intensity estimate is 0", i + 1);
            }
            events.count(i) as f64 / len
        })
        .collect();
    Ok(MeanIntensity { lambda_bar })
}

/// Nonzero bin counts of one component, sorted by bin index.
struct SparseCounts {
    bins: Vec<usize>,
    counts: Vec<f64>,
    /// `prefix[m]` = sum of `counts[..m]`.
    prefix: Vec<f64>,
}

impl SparseCounts {
    fn build(times: &[f64], t_start: f64, cfg: &CovarianceConfig, nbins: usize) -> Self {
        let mut hits: Vec<usize> = Vec::with_capacity(times.len());
        // Bin k covers [kΔ, kΔ + h); membership is decided in units of Δ so that
        // h = Δ reduces exactly to floor(x / Δ).
        let width = cfg.h / cfg.delta;
        for &t in times {
            let u = (t - t_start) / cfg.delta;
            let hi = u.floor();
            if hi < 0.0 {
                continue;
            }
            let lo = ((u - width).floor() + 1.0).max(0.0) as usize;
            let hi = (hi as usize).min(nbins.saturating_sub(1));
            for k in lo..=hi {
                let start = k as f64;
                if u >= start && u < start + width {
                    hits.push(k);
                }
            }
        }
        hits.sort_unstable();
        let mut bins = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        for k in hits {
            if bins.last() == Some(&k) {
                *counts.last_mut().expect("paired with bins") += 1.0;
            } else {
                bins.push(k);
                counts.push(1.0);
            }
        }
        let mut prefix = Vec::with_capacity(counts.len() + 1);
        prefix.push(0.0);
        for c in &counts {
            prefix.push(prefix.last().expect("non-empty") + c);
        }
        SparseCounts { bins, counts, prefix }
    }

    fn total(&self) -> f64 {
        *self.prefix.last().expect("non-empty")
    }

    /// Sum of counts over bins `< b`.
    fn below(&self, b: usize) -> f64 {
        self.prefix[self.bins.partition_point(|&x| x < b)]
    }
}

/// Empirical `v^{(h)}_{kΔ}` from binned counts.
///
/// Bins `[t_start + kΔ, t_start + kΔ + h)` lying fully inside the window are
/// used. Each lag is normalized by the total number of bins (biased
/// estimator) and by `h`; negative lags are filled by transposition.
pub fn estimate_covariance(events: &EventSeries, cfg: &CovarianceConfig) -> Result<SampledMatrixFunction> {
    cfg.validate()?;
    let len = events.duration();
    if len < 2.0 * (cfg.tau_max + cfg.h) {
        return Err(HawkesError::invalid(format!(
            "window length {len} is shorter than 2·(tau_max + h) = {}",
            2.0 * (cfg.tau_max + cfg.h)
        )));
    }
    let n = events.n;
    let lags = cfg.lags();
    let nbins = ((len - cfg.h) / cfg.delta * (1.0 + 1e-12)).floor() as usize + 1;
    let mean = estimate_mean_intensity(events)?;
    let sparse: Vec<SparseCounts> = events
        .events
        .iter()
        .map(|times| SparseCounts::build(times, events.t_start, cfg, nbins))
        .collect();
    let bin_means: Vec<f64> = sparse.iter().map(|s| s.total() / nbins as f64).collect();

    let mut out = SampledMatrixFunction::zeros(n, cfg.h, cfg.delta, lags, mean.lambda_bar);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let columns: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&sparse[i], &sparse[j]);
            let mut cross = vec![0.0; lags + 1];
            let mut first = 0;
            for (&t, &x) in a.bins.iter().zip(&a.counts) {
                while first < b.bins.len() && b.bins[first] < t {
                    first += 1;
                }
                for m in first..b.bins.len() {
                    let lag = b.bins[m] - t;
                    if lag > lags {
                        break;
                    }
                    cross[lag] += x * b.counts[m];
                }
            }
            let (mi, mj) = (bin_means[i], bin_means[j]);
            (0..=lags)
                .map(|k| {
                    if k >= nbins {
                        return 0.0;
                    }
                    let head = a.below(nbins - k);
                    let tail = b.total() - b.below(k);
                    let pairs = (nbins - k) as f64;
                    let centered = cross[k] - mj * head - mi * tail + pairs * mi * mj;
                    centered / nbins as f64 / cfg.h
                })
                .collect()
        })
        .collect();
    for (&(i, j), col) in pairs.iter().zip(&columns) {
        for (k, &v) in col.iter().enumerate() {
            out.set(k as isize, i, j, v);
            out.set(-(k as isize), j, i, v);
        }
    }
    Ok(out)
}

/// `g^{(h)}_τ = (1 - |τ|/h)^+`.
pub fn triangle(h: f64, tau: f64) -> f64 {
    (1.0 - tau.abs() / h).max(0.0)
}

/// Covariance implied by a kernel, from `v̂ = ĝ (I + Ψ̂*) Σ (I + Ψ̂*)†`.
///
/// The Dirac part `Σ g^{(h)}_τ` is added analytically; the remainder is
/// inverse-transformed by FFT on a lag grid `Δ / r` fine enough that `ĝ` has
/// decayed by several orders of magnitude at the band edge.
pub fn theoretical_covariance(
    spec: &KernelSpec,
    mu: &BackgroundRate,
    cfg: &CovarianceConfig,
) -> Result<SampledMatrixFunction> {
    cfg.validate()?;
    let mean = crate::kernels::mean_intensity(spec, mu)?;
    let n = spec.n;
    let lags = cfg.lags();
    let sigma = mean.sigma().map(|x| Complex64::new(x, 0.0));

    // Fine grid: step Δ/r with r chosen so the step is at most h/8.
    let r = ((8.0 * cfg.delta / cfg.h).ceil() as usize).max(1);
    let fine = cfg.delta / r as f64;
    let period = 32.0 * (cfg.tau_max + cfg.h);
    let m = ((period / fine).ceil() as usize).next_power_of_two();
    let d_omega = 2.0 * std::f64::consts::PI / (m as f64 * fine);

    // Q(ω) = (I + Ψ̂*) Σ (I + Ψ̂*)† - Σ for ω ≥ 0; negative frequencies by conjugation.
    let half = m / 2;
    let q: Vec<CMatrix> = (0..=half)
        .into_par_iter()
        .map(|idx| {
            let omega = idx as f64 * d_omega;
            let psi = psi_hat_from_phi_hat(&spec.phi_hat(omega)?)?;
            let p = CMatrix::identity(n, n) + psi.map(|z| z.conj());
            let g = g_hat(cfg.h, omega);
            Ok((&p * &sigma * p.adjoint() - &sigma) * Complex64::new(g, 0.0))
        })
        .collect::<Result<_>>()?;

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(m);
    let mut out = SampledMatrixFunction::zeros(n, cfg.h, cfg.delta, lags, mean.lambda_bar.clone());
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for i in 0..n {
        for j in 0..n {
            for (idx, slot) in buf.iter_mut().enumerate() {
                *slot = if idx <= half { q[idx][(i, j)] } else { q[m - idx][(i, j)].conj() };
            }
            // The Nyquist bin stands for both ±π/δ; keep it real.
            buf[half] = Complex64::new(buf[half].re, 0.0);
            ifft.process(&mut buf);
            for k in -(lags as isize)..=lags as isize {
                let l = (k * r as isize).rem_euclid(m as isize) as usize;
                let smooth = buf[l].re / (m as f64 * fine);
                let dirac = if i == j { mean.lambda_bar[i] * triangle(cfg.h, k as f64 * cfg.delta) } else { 0.0 };
                out.set(k, i, j, dirac + smooth);
            }
        }
    }
    Ok(out)
}

/// Entrywise mean of covariance estimates on a common grid.
pub fn average_covariances(items: &[SampledMatrixFunction]) -> Result<SampledMatrixFunction> {
    let first = items.first().ok_or_else(|| HawkesError::invalid("no covariance estimates to average"))?;
    for (idx, c) in items.iter().enumerate().skip(1) {
        if !first.same_grid(c) {
            return Err(HawkesError::GridMismatch(format!(
                "estimate {idx} has (n={}, h={}, delta={}, K={}) but estimate 0 has (n={}, h={}, delta={}, K={})",
                c.n, c.h, c.delta, c.lags, first.n, first.h, first.delta, first.lags
            )));
        }
    }
    let count = items.len() as f64;
    let mut out = first.clone();
    for (slot, idx) in out.values.iter_mut().zip(0..) {
        *slot = items.iter().map(|c| c.values[idx]).sum::<f64>() / count;
    }
    for (slot, idx) in out.lambda_bar.iter_mut().zip(0..) {
        *slot = items.iter().map(|c| c.lambda_bar[idx]).sum::<f64>() / count;
    }
    Ok(out)
}

/// Averages `(11, 22)` and `(12, 21)` at every lag so the result is exactly bisymmetric.
pub fn symmetrize_bisym(cov: &SampledMatrixFunction) -> Result<SampledMatrixFunction> {
    if cov.n != 2 {
        return Err(HawkesError::Dimension { expected: 2, got: cov.n });
    }
    let mut out = cov.clone();
    for k in -(cov.lags as isize)..=cov.lags as isize {
        let d = 0.5 * (cov.get(k, 0, 0) + cov.get(k, 1, 1));
        let a = 0.5 * (cov.get(k, 0, 1) + cov.get(k, 1, 0));
        out.set(k, 0, 0, d);
        out.set(k, 1, 1, d);
        out.set(k, 0, 1, a);
        out.set(k, 1, 0, a);
    }
    let l = 0.5 * (cov.lambda_bar[0] + cov.lambda_bar[1]);
    out.lambda_bar = vec![l, l];
    Ok(out)
}
