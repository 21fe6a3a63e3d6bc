//! Parametric kernel families and the algebra relating φ̂ to Ψ̂.
//!
//! A kernel matrix `φ` has entry `(i, j)` describing how an event of component
//! `j` raises the intensity of component `i`:
//!
//! ```text
//! λ^i_t = μ^i + Σ_j ∫ φ^{ij}_{t-s} dN^j_s
//! ```
//!
//! Transforms use the convention `φ̂(ω) = ∫_0^∞ e^{-iωt} φ_t dt`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::quadrature;

/// Relative tolerance for the power-law Fourier quadrature.
pub const POWER_LAW_REL_TOL: f64 = 1e-8;
/// Power-law quadrature switches to the tail treatment at `t = POWER_LAW_TAIL_SHIFTS * γ`.
pub const POWER_LAW_TAIL_SHIFTS: f64 = 100.0;

pub type CMatrix = DMatrix<Complex64>;

/// One entry of a kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum KernelEntry {
    #[serde(rename = "zero")]
    Zero,
    /// `α e^{-βt}`
    #[serde(rename = "exp")]
    Exponential { alpha: f64, beta: f64 },
    /// `α (t + γ)^β` with `β < -1`
    #[serde(rename = "power_law")]
    PowerLaw { alpha: f64, beta: f64, gamma: f64 },
    /// Samples on `t = k·step`, linearly interpolated, zero past the last sample.
    #[serde(rename = "tabulated")]
    Tabulated { step: f64, values: Vec<f64> },
}

impl KernelEntry {
    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        match *self {
            KernelEntry::Zero => Ok(()),
            KernelEntry::Exponential { alpha, beta } => {
                if !(finite(alpha) && alpha >= 0.0) {
                    return Err(HawkesError::invalid(format!("exp kernel: alpha must be >= 0, got {alpha}")));
                }
                if !(finite(beta) && beta > 0.0) {
                    return Err(HawkesError::invalid(format!("exp kernel: beta must be > 0, got {beta}")));
                }
                Ok(())
            }
            KernelEntry::PowerLaw { alpha, beta, gamma } => {
                if !(finite(alpha) && alpha >= 0.0) {
                    return Err(HawkesError::invalid(format!("power-law kernel: alpha must be >= 0, got {alpha}")));
                }
                if !(finite(beta) && beta < -1.0) {
                    return Err(HawkesError::invalid(format!("power-law kernel: beta must be < -1, got {beta}")));
                }
                if !(finite(gamma) && gamma > 0.0) {
                    return Err(HawkesError::invalid(format!("power-law kernel: gamma must be > 0, got {gamma}")));
                }
                Ok(())
            }
            KernelEntry::Tabulated { step, ref values } => {
                if !(finite(step) && step > 0.0) {
                    return Err(HawkesError::invalid(format!("tabulated kernel: step must be > 0, got {step}")));
                }
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(HawkesError::invalid(format!("tabulated kernel: values must be finite and >= 0, got {v}")));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            KernelEntry::Zero => true,
            KernelEntry::Exponential { alpha, .. } | KernelEntry::PowerLaw { alpha, .. } => *alpha == 0.0,
            KernelEntry::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// `φ(t)`; zero for `t < 0`.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            KernelEntry::Zero => 0.0,
            KernelEntry::Exponential { alpha, beta } => alpha * (-beta * t).exp(),
            KernelEntry::PowerLaw { alpha, beta, gamma } => alpha * (t + gamma).powf(beta),
            KernelEntry::Tabulated { step, ref values } => {
                if values.is_empty() {
                    return 0.0;
                }
                let mut x = t / step;
                // Lags computed as k·Δ land a few ulps off the node.
                if (x - x.round()).abs() <= 1e-9 * x.max(1.0) {
                    x = x.round();
                }
                let k = x.floor() as usize;
                if k + 1 >= values.len() {
                    // Exactly on the last node keeps its value; beyond it the kernel vanishes.
                    return if k + 1 == values.len() && x == k as f64 { values[k] } else { 0.0 };
                }
                let frac = x - k as f64;
                values[k] * (1.0 - frac) + values[k + 1] * frac
            }
        }
    }

    /// `∫_0^∞ φ_t dt`.
    pub fn integral(&self) -> f64 {
        match *self {
            KernelEntry::Zero => 0.0,
            KernelEntry::Exponential { alpha, beta } => alpha / beta,
            KernelEntry::PowerLaw { alpha, beta, gamma } => -alpha * gamma.powf(beta + 1.0) / (beta + 1.0),
            KernelEntry::Tabulated { step, ref values } => match values.len() {
                0 => 0.0,
                1 => 0.0,
                m => step * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[m - 1])),
            },
        }
    }

    /// `φ̂(ω)`. Exponential entries use the closed form, power laws adaptive
    /// quadrature plus a tail expansion, tabulated entries the exact transform
    /// of the piecewise-linear interpolant.
    pub fn fourier(&self, omega: f64) -> Result<Complex64> {
        match *self {
            KernelEntry::Zero => Ok(Complex64::new(0.0, 0.0)),
            KernelEntry::Exponential { alpha, beta } => {
                Ok(Complex64::new(alpha, 0.0) / Complex64::new(beta, omega))
            }
            KernelEntry::PowerLaw { alpha, beta, gamma } => power_law_fourier(alpha, beta, gamma, omega),
            KernelEntry::Tabulated { step, ref values } => Ok(tabulated_fourier(step, values, omega)),
        }
    }
}

fn power_law_fourier(alpha: f64, beta: f64, gamma: f64, omega: f64) -> Result<Complex64> {
    if alpha == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let total_mass = -alpha * gamma.powf(beta + 1.0) / (beta + 1.0);
    if omega == 0.0 {
        return Ok(Complex64::new(total_mass, 0.0));
    }
    let f = |t: f64| alpha * (t + gamma).powf(beta);
    let integrand = |t: f64| Complex64::from_polar(f(t), -omega * t);
    let abs_tol = 1e-14 * total_mass;

    let cut = POWER_LAW_TAIL_SHIFTS * gamma;
    let body = quadrature::integrate(integrand, 0.0, cut, POWER_LAW_REL_TOL, abs_tol);
    if !body.converged {
        return Err(HawkesError::numerical(format!(
            "power-law transform at omega={omega}: quadrature error {:.3e} exceeds rel tol {POWER_LAW_REL_TOL:e}",
            body.error
        )));
    }
    let mut total = body.value;

    // Tail: geometric panels until the asymptotic expansion is accurate or the
    // remaining mass is negligible.
    let mut a = cut;
    loop {
        let remaining = -alpha * (a + gamma).powf(beta + 1.0) / (beta + 1.0);
        if remaining <= abs_tol.max(1e-3 * POWER_LAW_REL_TOL * total.norm()) {
            break;
        }
        if omega.abs() * (a + gamma) >= 30.0 {
            total += power_law_tail_expansion(alpha, beta, gamma, omega, a);
            break;
        }
        let b = 2.0 * a + gamma;
        let panel = quadrature::integrate(integrand, a, b, POWER_LAW_REL_TOL, abs_tol);
        if !panel.converged {
            return Err(HawkesError::numerical(format!(
                "power-law transform tail at omega={omega}: tolerance {POWER_LAW_REL_TOL:e} unmet"
            )));
        }
        total += panel.value;
        a = b;
    }
    Ok(total)
}

/// `∫_a^∞ e^{-iωt} α(t+γ)^β dt` by repeated integration by parts:
/// `e^{-iωa} Σ_k f^{(k)}(a) / (iω)^{k+1}`.
fn power_law_tail_expansion(alpha: f64, beta: f64, gamma: f64, omega: f64, a: f64) -> Complex64 {
    let iw = Complex64::new(0.0, omega);
    let x = a + gamma;
    let mut deriv = alpha * x.powf(beta);
    let mut denom = iw;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut prev = f64::INFINITY;
    for k in 0..20 {
        let term = deriv / denom;
        if term.norm() > prev {
            break;
        }
        prev = term.norm();
        sum += term;
        if prev < 1e-18 * sum.norm() {
            break;
        }
        deriv *= (beta - k as f64) / x;
        denom *= iw;
    }
    sum * Complex64::from_polar(1.0, -omega * a)
}

/// Exact transform of the piecewise-linear interpolant of `values`.
///
/// With `θ = -iω·step`, each segment contributes `step·e^{-iωt_k}(f_k A(θ) + f_{k+1} B(θ))`
/// where `A = ∫_0^1 e^{θx}(1-x)dx` and `B = ∫_0^1 e^{θx} x dx`.
fn tabulated_fourier(step: f64, values: &[f64], omega: f64) -> Complex64 {
    if values.len() < 2 {
        return Complex64::new(0.0, 0.0);
    }
    let theta = Complex64::new(0.0, -omega * step);
    let (wa, wb) = linear_element_weights(theta);
    let rot = Complex64::from_polar(1.0, -omega * step);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for pair in values.windows(2) {
        acc += phase * (wa * pair[0] + wb * pair[1]);
        phase *= rot;
    }
    acc * step
}

fn linear_element_weights(theta: Complex64) -> (Complex64, Complex64) {
    if theta.norm() < 0.5 {
        // Σ θ^k / (k! (k+1)(k+2)) and Σ θ^k / (k! (k+2))
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for k in 0..24 {
            let kf = k as f64;
            if k > 0 {
                fact *= kf;
            }
            a += pow / (fact * (kf + 1.0) * (kf + 2.0));
            b += pow / (fact * (kf + 2.0));
            pow *= theta;
        }
        (a, b)
    } else {
        let e = theta.exp();
        let b = (e * (theta - 1.0) + 1.0) / (theta * theta);
        let a = (e - 1.0) / theta - b;
        (a, b)
    }
}

/// An `n × n` kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub n: usize,
    pub entries: Vec<Vec<KernelEntry>>,
}

impl KernelSpec {
    pub fn new(entries: Vec<Vec<KernelEntry>>) -> Result<Self> {
        let spec = KernelSpec { n: entries.len(), entries };
        spec.validate()?;
        Ok(spec)
    }

    /// Scalar kernel.
    pub fn scalar(entry: KernelEntry) -> Result<Self> {
        KernelSpec::new(vec![vec![entry]])
    }

    /// Bisymmetric 2×2 kernel with `diag` on the diagonal and `anti` off it.
    pub fn bisymmetric(diag: KernelEntry, anti: KernelEntry) -> Result<Self> {
        KernelSpec::new(vec![vec![diag.clone(), anti.clone()], vec![anti, diag]])
    }

    pub fn zero(n: usize) -> Result<Self> {
        KernelSpec::new(vec![vec![KernelEntry::Zero; n]; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(HawkesError::invalid("kernel dimension must be positive"));
        }
        if self.entries.len() != self.n || self.entries.iter().any(|row| row.len() != self.n) {
            return Err(HawkesError::invalid(format!("kernel entries must form a {0}x{0} grid", self.n)));
        }
        for (i, row) in self.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                e.validate().map_err(|err| HawkesError::invalid(format!("entry ({},{}): {err}", i + 1, j + 1)))?;
            }
        }
        Ok(())
    }

    pub fn entry(&self, i: usize, j: usize) -> &KernelEntry {
        &self.entries[i][j]
    }

    /// `φ̂(ω)` as a complex matrix.
    pub fn phi_hat(&self, omega: f64) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(i, j)] = self.entries[i][j].fourier(omega)?;
            }
        }
        Ok(out)
    }

    /// The real matrix `φ̂_0 = ∫ φ_t dt`.
    pub fn integrated(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entries[i][j].integral())
    }

    /// Largest eigenvalue modulus of `φ̂_0`; the process is stationary iff this is < 1.
    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius_of(&self.integrated())
    }

    pub fn is_bisymmetric(&self) -> bool {
        self.n == 2 && self.entries[0][0] == self.entries[1][1] && self.entries[0][1] == self.entries[1][0]
    }

    /// Whether every nonzero entry is exponential.
    pub fn is_exponential(&self) -> bool {
        self.entries
            .iter()
            .flatten()
            .all(|e| matches!(e, KernelEntry::Zero | KernelEntry::Exponential { .. }) || e.is_zero())
    }
}

pub fn spectral_radius_of(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(HawkesError::numerical("non-finite entries in integrated kernel"));
    }
    let rho = match m.nrows() {
        1 => m[(0, 0)].abs(),
        _ => m
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
    };
    if !rho.is_finite() {
        return Err(HawkesError::numerical("eigenvalue iteration failed"));
    }
    Ok(rho)
}

/// Background rate vector `μ`, strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BackgroundRate(Vec<f64>);

impl BackgroundRate {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(HawkesError::invalid("background rate must be non-empty"));
        }
        if let Some(m) = mu.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(HawkesError::invalid(format!("background rates must be > 0, got {m}")));
        }
        Ok(BackgroundRate(mu))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Stationary mean intensity `Λ` and the diagonal `Σ = diag(Λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanIntensity {
    pub lambda_bar: Vec<f64>,
}

impl MeanIntensity {
    pub fn sigma(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.lambda_bar))
    }

    /// Average over components, the scalar `λ̄` used when all components share one rate.
    pub fn average(&self) -> f64 {
        self.lambda_bar.iter().sum::<f64>() / self.lambda_bar.len() as f64
    }
}

/// `Λ = (I - φ̂_0)^{-1} μ`.
pub fn mean_intensity(spec: &KernelSpec, mu: &BackgroundRate) -> Result<MeanIntensity> {
    if mu.len() != spec.n {
        return Err(HawkesError::Dimension { expected: spec.n, got: mu.len() });
    }
    let rho = spec.spectral_radius()?;
    if rho >= 1.0 {
        return Err(HawkesError::NotStationary(rho));
    }
    let a = DMatrix::<f64>::identity(spec.n, spec.n) - spec.integrated();
    let rhs = nalgebra::DVector::from_column_slice(mu.as_slice());
    let lambda = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| HawkesError::Singular("I - φ̂_0".into()))?;
    if lambda.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(HawkesError::numerical("mean intensity not finite and positive"));
    }
    Ok(MeanIntensity { lambda_bar: lambda.iter().copied().collect() })
}

fn checked_inverse(m: CMatrix, what: &str) -> Result<CMatrix> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let det = m.clone().lu().determinant();
    if !(det.norm() > 1e-14 * scale.powi(n as i32)) {
        return Err(HawkesError::Singular(what.into()));
    }
    m.try_inverse().ok_or_else(|| HawkesError::Singular(what.into()))
}

/// `Ψ̂ = φ̂ (I - φ̂)^{-1}`.
pub fn psi_hat_from_phi_hat(phi_hat: &CMatrix) -> Result<CMatrix> {
    let n = phi_hat.nrows();
    let inv = checked_inverse(CMatrix::identity(n, n) - phi_hat, "I - φ̂")?;
    Ok(phi_hat * inv)
}

/// `φ̂ = (I + Ψ̂)^{-1} Ψ̂`.
pub fn phi_hat_from_psi_hat(psi_hat: &CMatrix) -> Result<CMatrix> {
    let n = psi_hat.nrows();
    let inv = checked_inverse(CMatrix::identity(n, n) + psi_hat, "I + Ψ̂")?;
    Ok(inv * psi_hat)
}

/// A kernel together with its background rate; the JSON form used on the CLI:
/// `{"n": 2, "entries": [[{"type":"exp","alpha":0.5,"beta":8.0}, ...], ...], "mu": [1.0, 1.0]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesModel {
    #[serde(flatten)]
    pub kernel: KernelSpec,
    pub mu: BackgroundRate,
}

impl HawkesModel {
    pub fn new(kernel: KernelSpec, mu: BackgroundRate) -> Result<Self> {
        let model = HawkesModel { kernel, mu };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        BackgroundRate::new(self.mu.0.clone())?;
        if self.mu.len() != self.kernel.n {
            return Err(HawkesError::Dimension { expected: self.kernel.n, got: self.mu.len() });
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: HawkesModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn mean_intensity(&self) -> Result<MeanIntensity> {
        mean_intensity(&self.kernel, &self.mu)
    }
}
