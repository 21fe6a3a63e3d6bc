//! Kernel recovery from the covariance spectrum.
//!
//! Steps: DFT of the lag-sampled covariance, division by `λ̄ ĝ^{(h)}`, minimal-phase
//! square root through a discrete Hilbert transform, `φ̂ = (I + Ψ̂)^{-1} Ψ̂`, and an
//! inverse DFT back to lags. Only the scalar case and the bisymmetric 2×2 case
//! (diagonalized by a fixed unitary) are supported.
//!
//! DFT convention: `F(ω) = Δ Σ_k f(kΔ) e^{-iωkΔ}`, so sampled functions
//! approximate their continuous transforms.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::covariance::{triangle, SampledMatrixFunction};
use crate::error::{HawkesError, Result};
use crate::kernels::{phi_hat_from_psi_hat, CMatrix};

/// Spectrum ratios are floored at this fraction of their maximum before taking logs.
pub const CLIP_RELATIVE_FLOOR: f64 = 1e-10;
/// Zero-padding factor applied to the lag grid before the minimal-phase step.
pub const DEFAULT_PAD_FACTOR: usize = 4;
/// Maximum tolerated RMS(imaginary) / RMS(real) after the inverse DFT.
pub const MAX_IMAG_RESIDUE: f64 = 0.01;

/// `ĝ^{(h)}(ω) = (4 / ω²h) sin²(ωh/2)`, equal to `h` at `ω = 0`.
pub fn g_hat(h: f64, omega: f64) -> f64 {
    let x = 0.5 * omega * h;
    if x == 0.0 {
        return h;
    }
    let sinc = x.sin() / x;
    h * sinc * sinc
}

/// DFT of the triangle `g^{(h)}` sampled on the lag grid: `Δ Σ_k g(kΔ) e^{-iωkΔ}`.
///
/// This is `ĝ` periodized over the sampling band; for `Δ = h` it is the constant `h`.
pub fn sampled_g_hat(h: f64, delta: f64, omega: f64) -> f64 {
    let mut acc = triangle(h, 0.0);
    let mut k = 1;
    loop {
        let g = triangle(h, k as f64 * delta);
        if g <= 0.0 {
            break;
        }
        acc += 2.0 * g * (omega * k as f64 * delta).cos();
        k += 1;
    }
    delta * acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumRole {
    VHat,
    E,
    D,
    PsiHat,
    PhiHat,
}

/// Complex `n × n` matrices on the DFT frequency grid `ω_m = 2π m / (MΔ)`,
/// stored in FFT order (non-negative frequencies first).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub n: usize,
    pub delta: f64,
    pub h: f64,
    pub role: SpectrumRole,
    /// `values[m]` is the matrix at `omega(m)`.
    pub values: Vec<CMatrix>,
    pub lambda_bar: Vec<f64>,
}

impl SpectrumGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn omega(&self, m: usize) -> f64 {
        frequency(m, self.len(), self.delta)
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.len()).map(|m| self.omega(m)).collect()
    }
}

/// Angular frequency of FFT bin `m` out of `len` for lag step `delta`.
pub fn frequency(m: usize, len: usize, delta: f64) -> f64 {
    let signed = if 2 * m <= len { m as f64 } else { m as f64 - len as f64 };
    2.0 * std::f64::consts::PI * signed / (len as f64 * delta)
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let plan = if inverse { planner.plan_fft_inverse(buf.len()) } else { planner.plan_fft_forward(buf.len()) };
    plan.process(buf);
}

/// Places lags `-K..=K` of `series` into a circular buffer of length `len`.
fn wrap_lags(series: &[f64], lags: usize, len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (idx, &v) in series.iter().enumerate() {
        let k = idx as isize - lags as isize;
        buf[k.rem_euclid(len as isize) as usize] = Complex64::new(v, 0.0);
    }
    buf
}

/// Scalar DFT of lag samples `-K..=K`, zero-padded to `len ≥ 2K + 1`.
fn lag_series_to_freq(series: &[f64], lags: usize, delta: f64, len: usize) -> Vec<Complex64> {
    let mut buf = wrap_lags(series, lags, len);
    fft_in_place(&mut buf, false);
    for z in &mut buf {
        *z *= delta;
    }
    buf
}

/// Inverse of [`lag_series_to_freq`]: complex lag samples at `k = 0..len` (circular).
fn freq_to_lag_series(spectrum: &[Complex64], delta: f64) -> Vec<Complex64> {
    let len = spectrum.len();
    let mut buf = spectrum.to_vec();
    fft_in_place(&mut buf, true);
    let scale = 1.0 / (len as f64 * delta);
    for z in &mut buf {
        *z *= scale;
    }
    buf
}

/// DFT of a lag-sampled matrix function on its own `2K + 1` grid.
pub fn dft_lag_to_freq(f: &SampledMatrixFunction) -> SpectrumGrid {
    dft_lag_to_freq_padded(f, f.len())
}

/// DFT zero-padded to `len` frequency bins.
pub fn dft_lag_to_freq_padded(f: &SampledMatrixFunction, len: usize) -> SpectrumGrid {
    let n = f.n;
    let len = len.max(f.len());
    let mut values = vec![CMatrix::zeros(n, n); len];
    for i in 0..n {
        for j in 0..n {
            let spec = lag_series_to_freq(&f.series(i, j), f.lags, f.delta, len);
            for (m, z) in spec.into_iter().enumerate() {
                values[m][(i, j)] = z;
            }
        }
    }
    SpectrumGrid { n, delta: f.delta, h: f.h, role: SpectrumRole::VHat, values, lambda_bar: f.lambda_bar.clone() }
}

/// Inverse DFT back to lags `-K..=K`, `K = (len - 1) / 2`. Imaginary parts are dropped.
pub fn idft_freq_to_lag(s: &SpectrumGrid) -> SampledMatrixFunction {
    idft_freq_to_lags(s, (s.len() - 1) / 2)
}

/// Inverse DFT keeping lags `-lags..=lags` of the circular result.
pub fn idft_freq_to_lags(s: &SpectrumGrid, lags: usize) -> SampledMatrixFunction {
    let n = s.n;
    let len = s.len();
    let mut out = SampledMatrixFunction::zeros(n, s.h, s.delta, lags, s.lambda_bar.clone());
    for i in 0..n {
        for j in 0..n {
            let column: Vec<Complex64> = s.values.iter().map(|m| m[(i, j)]).collect();
            let lagged = freq_to_lag_series(&column, s.delta);
            for k in -(lags as isize)..=lags as isize {
                out.set(k, i, j, lagged[k.rem_euclid(len as isize) as usize].re);
            }
        }
    }
    out
}

/// Discrete Hilbert transform of samples on a full periodic grid: forward DFT,
/// multiply by `-i·sign`, inverse DFT, real part. The zero bin and (for even
/// lengths) the Nyquist bin get sign 0, so constants map to zero and
/// `cos ↦ sin`.
pub fn hilbert_phase(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(HawkesError::numerical("non-finite input to Hilbert transform"));
    }
    let len = samples.len();
    if len == 0 {
        return Ok(Vec::new());
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf, false);
    for (q, z) in buf.iter_mut().enumerate() {
        let sign = if q == 0 || 2 * q == len {
            0.0
        } else if 2 * q < len {
            1.0
        } else {
            -1.0
        };
        *z *= Complex64::new(0.0, -sign);
    }
    fft_in_place(&mut buf, true);
    Ok(buf.iter().map(|z| z.re / len as f64).collect())
}

/// The causal minimal-phase factor recovered from a squared modulus.
#[derive(Debug, Clone)]
pub struct MinimalPhase {
    /// `(1 - D)^{-1} = exp(½ log E - i H(½ log E))`, modulus `√E`.
    pub inverse_one_minus_d: Vec<Complex64>,
    /// Frequencies where `E` was raised to the clipping floor.
    pub clip_count: usize,
}

impl MinimalPhase {
    /// `D = 1 - 1 / (1 - D)^{-1}`.
    pub fn d(&self) -> Vec<Complex64> {
        self.inverse_one_minus_d.iter().map(|a| Complex64::new(1.0, 0.0) - a.inv()).collect()
    }
}

/// Minimal-phase square root of `E = |1 - D|^{-2}` sampled on a full FFT-ordered grid.
pub fn minimal_phase_root(e: &[f64]) -> Result<MinimalPhase> {
    if e.iter().any(|x| !x.is_finite()) {
        return Err(HawkesError::numerical("non-finite spectrum ratio"));
    }
    let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(HawkesError::numerical("spectrum ratio is nowhere positive; invalid covariance input"));
    }
    let floor = CLIP_RELATIVE_FLOOR * max;
    let mut clip_count = 0;
    let half_log: Vec<f64> = e
        .iter()
        .map(|&x| {
            if x < floor {
                clip_count += 1;
                0.5 * floor.ln()
            } else {
                0.5 * x.ln()
            }
        })
        .collect();
    let phase = hilbert_phase(&half_log)?;
    let inverse_one_minus_d = half_log
        .iter()
        .zip(&phase)
        .map(|(&l, &p)| Complex64::new(l, -p).exp())
        .collect();
    Ok(MinimalPhase { inverse_one_minus_d, clip_count })
}

/// What the covariance spectrum is divided by before the square root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GhatDivisor {
    /// DFT of the triangle sampled on the lag grid (aliasing-consistent with the sampled covariance).
    SampledTriangle,
    /// The continuous `ĝ^{(h)}` formula at the grid frequencies.
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub pad_factor: usize,
    pub divisor: GhatDivisor,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { pad_factor: DEFAULT_PAD_FACTOR, divisor: GhatDivisor::SampledTriangle }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimationDiagnostics {
    pub h: f64,
    pub delta: f64,
    pub tau_max: f64,
    pub lambda_bar: f64,
    /// Frequencies floored before the logarithm, summed over branches.
    pub clip_count: usize,
    /// `Σ_{k<0} |φ_k| / Σ_{k>0} |φ_k|` of the recovered kernel(s), worst entry.
    pub neg_mass_ratio: f64,
    /// RMS(imaginary)/RMS(real) after the inverse DFT, worst entry.
    pub imag_residue: f64,
    /// Share of the excess spectrum `|E - 1|²` lying in the top tenth of the band.
    pub aliasing_fraction: f64,
}

/// Estimated kernel entries on `t = kΔ`, `k = 0..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub delta: f64,
    pub lags: usize,
    /// `(name, samples)`; `phi11` for the scalar case, `phi11` (diagonal) and
    /// `phi12` (anti-diagonal) for the bisymmetric case.
    pub columns: Vec<(String, Vec<f64>)>,
    pub diagnostics: EstimationDiagnostics,
}

impl KernelEstimate {
    pub fn times(&self) -> Vec<f64> {
        (0..=self.lags).map(|k| k as f64 * self.delta).collect()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// `Δ Σ_{k≥1} φ_k` per column, a Riemann estimate of `φ̂_0` excluding the `t = 0` sample.
    pub fn integrals(&self) -> Vec<f64> {
        self.columns.iter().map(|(_, v)| self.delta * v.iter().skip(1).sum::<f64>()).collect()
    }
}

/// Spectrum ratio `v̂ / (λ̄ ĝ)` for one real-even lag series, on a padded grid.
fn spectrum_ratio(series: &[f64], cov: &SampledMatrixFunction, lambda_bar: f64, len: usize, opts: &EstimatorOptions) -> Vec<f64> {
    let spectrum = lag_series_to_freq(series, cov.lags, cov.delta, len);
    spectrum
        .iter()
        .enumerate()
        .map(|(m, z)| {
            let omega = frequency(m, len, cov.delta);
            let g = match opts.divisor {
                GhatDivisor::SampledTriangle => sampled_g_hat(cov.h, cov.delta, omega),
                GhatDivisor::ClosedForm => g_hat(cov.h, omega),
            };
            z.re / (lambda_bar * g)
        })
        .collect()
}

fn aliasing_fraction(e: &[f64]) -> f64 {
    let len = e.len();
    let mut total = 0.0;
    let mut top = 0.0;
    for (m, &x) in e.iter().enumerate() {
        let w = (x - 1.0).powi(2);
        total += w;
        let signed = if 2 * m <= len { m } else { len - m };
        if 20 * signed >= 9 * len {
            top += w;
        }
    }
    if total > 0.0 {
        top / total
    } else {
        0.0
    }
}

struct LagResult {
    positive: Vec<f64>,
    neg_mass_ratio: f64,
    imag_residue: f64,
}

/// Inverse DFT of a kernel spectrum, keeping `t = 0..=K·Δ`.
fn kernel_from_spectrum(phi_hat: &[Complex64], delta: f64, lags: usize) -> Result<LagResult> {
    let len = phi_hat.len();
    let lagged = freq_to_lag_series(phi_hat, delta);
    let positive: Vec<f64> = (0..=lags).map(|k| lagged[k].re).collect();
    let pos_mass: f64 = (1..=lags).map(|k| lagged[k].re.abs()).sum();
    let neg_mass: f64 = (1..=lags).map(|k| lagged[len - k].re.abs()).sum();
    let rms = |f: &dyn Fn(&Complex64) -> f64| (lagged.iter().map(|z| f(z).powi(2)).sum::<f64>() / len as f64).sqrt();
    let re = rms(&|z| z.re);
    let im = rms(&|z| z.im);
    let imag_residue = if re > 0.0 { im / re } else { 0.0 };
    if imag_residue >= MAX_IMAG_RESIDUE {
        return Err(HawkesError::numerical(format!(
            "inverse DFT left an imaginary residue of {:.3}% of the real part",
            100.0 * imag_residue
        )));
    }
    let neg_mass_ratio = if pos_mass > 0.0 { neg_mass / pos_mass } else { 0.0 };
    Ok(LagResult { positive, neg_mass_ratio, imag_residue })
}

fn padded_len(cov: &SampledMatrixFunction, opts: &EstimatorOptions) -> usize {
    cov.len() * opts.pad_factor.max(1)
}

fn check_lambda(lambda_bar: f64) -> Result<()> {
    if !(lambda_bar.is_finite() && lambda_bar > 0.0) {
        return Err(HawkesError::invalid(format!("mean intensity must be > 0, got {lambda_bar}")));
    }
    Ok(())
}

/// Scalar kernel estimate from a 1D covariance.
pub fn estimate_kernel_1d(cov: &SampledMatrixFunction, lambda_bar: f64) -> Result<KernelEstimate> {
    estimate_kernel_1d_with(cov, lambda_bar, &EstimatorOptions::default())
}

pub fn estimate_kernel_1d_with(
    cov: &SampledMatrixFunction,
    lambda_bar: f64,
    opts: &EstimatorOptions,
) -> Result<KernelEstimate> {
    if cov.n != 1 {
        return Err(HawkesError::Dimension { expected: 1, got: cov.n });
    }
    check_lambda(lambda_bar)?;
    let len = padded_len(cov, opts);
    let e = spectrum_ratio(&cov.series(0, 0), cov, lambda_bar, len, opts);
    let root = minimal_phase_root(&e)?;
    // Scalar form of φ̂ = (1 + Ψ̂)^{-1} Ψ̂ with 1 + Ψ̂ = (1 - D)^{-1}.
    let phi_hat: Vec<Complex64> = root.inverse_one_minus_d.iter().map(|a| Complex64::new(1.0, 0.0) - a.inv()).collect();
    let lagged = kernel_from_spectrum(&phi_hat, cov.delta, cov.lags)?;
    Ok(KernelEstimate {
        delta: cov.delta,
        lags: cov.lags,
        columns: vec![("phi11".into(), lagged.positive)],
        diagnostics: EstimationDiagnostics {
            h: cov.h,
            delta: cov.delta,
            tau_max: cov.tau_max(),
            lambda_bar,
            clip_count: root.clip_count,
            neg_mass_ratio: lagged.neg_mass_ratio,
            imag_residue: lagged.imag_residue,
            aliasing_fraction: aliasing_fraction(&e),
        },
    })
}

/// The constant unitary diagonalizing bisymmetric 2×2 kernels, `(1/√2)[[-1, 1], [1, 1]]`.
pub fn bisymmetric_diagonalizer() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(-s, 0.0), Complex64::new(s, 0.0), Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
    )
}

/// Bisymmetric 2D estimate: returns columns `phi11` (diagonal) and `phi12` (anti-diagonal).
///
/// The covariance should be exactly bisymmetric; see [`crate::covariance::symmetrize_bisym`].
pub fn estimate_kernel_2d_bisym(cov: &SampledMatrixFunction, lambda_bar: f64) -> Result<KernelEstimate> {
    estimate_kernel_2d_bisym_with(cov, lambda_bar, &EstimatorOptions::default())
}

pub fn estimate_kernel_2d_bisym_with(
    cov: &SampledMatrixFunction,
    lambda_bar: f64,
    opts: &EstimatorOptions,
) -> Result<KernelEstimate> {
    if cov.n != 2 {
        return Err(HawkesError::Dimension { expected: 2, got: cov.n });
    }
    check_lambda(lambda_bar)?;
    let len = padded_len(cov, opts);
    let diag = cov.series(0, 0);
    let anti = cov.series(0, 1);
    let sum: Vec<f64> = diag.iter().zip(&anti).map(|(d, a)| d + a).collect();
    let diff: Vec<f64> = diag.iter().zip(&anti).map(|(d, a)| d - a).collect();
    let e_sum = spectrum_ratio(&sum, cov, lambda_bar, len, opts);
    let e_diff = spectrum_ratio(&diff, cov, lambda_bar, len, opts);
    // |1 + Ψ̂11 ± Ψ̂12|² branches.
    let plus = minimal_phase_root(&e_sum).map_err(|e| HawkesError::numerical(format!("sum branch: {e}")))?;
    let minus = minimal_phase_root(&e_diff).map_err(|e| HawkesError::numerical(format!("difference branch: {e}")))?;

    let one = Complex64::new(1.0, 0.0);
    let mut phi_d = Vec::with_capacity(len);
    let mut phi_a = Vec::with_capacity(len);
    for (ap, am) in plus.inverse_one_minus_d.iter().zip(&minus.inverse_one_minus_d) {
        let psi_d = 0.5 * (ap + am) - one;
        let psi_a = 0.5 * (ap - am);
        let psi = CMatrix::from_row_slice(2, 2, &[psi_d, psi_a, psi_a, psi_d]);
        let phi = phi_hat_from_psi_hat(&psi)?;
        phi_d.push(phi[(0, 0)]);
        phi_a.push(phi[(0, 1)]);
    }
    let d = kernel_from_spectrum(&phi_d, cov.delta, cov.lags)?;
    let a = kernel_from_spectrum(&phi_a, cov.delta, cov.lags)?;
    Ok(KernelEstimate {
        delta: cov.delta,
        lags: cov.lags,
        columns: vec![("phi11".into(), d.positive), ("phi12".into(), a.positive)],
        diagnostics: EstimationDiagnostics {
            h: cov.h,
            delta: cov.delta,
            tau_max: cov.tau_max(),
            lambda_bar,
            clip_count: plus.clip_count + minus.clip_count,
            neg_mass_ratio: d.neg_mass_ratio.max(a.neg_mass_ratio),
            imag_residue: d.imag_residue.max(a.imag_residue),
            aliasing_fraction: aliasing_fraction(&e_sum).max(aliasing_fraction(&e_diff)),
        },
    })
}

/// Relative RMS deviations from bisymmetry `(v11 - v22, v12 - v21)` over all lags,
/// each divided by the RMS of all four entries over all lags.
pub fn check_bisymmetry(cov: &SampledMatrixFunction) -> Result<(f64, f64)> {
    if cov.n != 2 {
        return Err(HawkesError::Dimension { expected: 2, got: cov.n });
    }
    let scale = (cov.values.iter().map(|x| x * x).sum::<f64>() / cov.values.len() as f64).sqrt();
    let rel = |a: Vec<f64>, b: Vec<f64>| {
        let rms = (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
        if rms == 0.0 {
            0.0
        } else {
            rms / scale
        }
    };
    Ok((rel(cov.series(0, 0), cov.series(1, 1)), rel(cov.series(0, 1), cov.series(1, 0))))
}
