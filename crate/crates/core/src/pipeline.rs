//! Multi-day estimation: per-day covariances, averaging, (2D) bisymmetry
//! checks, kernel estimation and an optional power-law fit.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{default_fit_range, powerlaw_fit, FitReport};
use crate::covariance::{
    average_covariances, estimate_covariance, estimate_mean_intensity, symmetrize_bisym, CovarianceConfig,
    SampledMatrixFunction,
};
use crate::error::{HawkesError, Result};
use crate::events::EventSeries;
use crate::io::{
    midprice_to_updown, parse_events, parse_prices, parse_windows, window_and_split, write_covariance, write_json,
    write_kernel, DroppedDay, DEFAULT_MIN_EVENTS,
};
use crate::spectral::{check_bisymmetry, estimate_kernel_1d, estimate_kernel_2d_bisym, KernelEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d-bisym")]
    TwoDBisym,
}

impl Mode {
    pub fn dimension(self) -> usize {
        match self {
            Mode::OneD => 1,
            Mode::TwoDBisym => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// `component,timestamp` CSV.
    Events,
    /// `timestamp,price` CSV, decomposed into up/down moves.
    Prices,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub covariance: CovarianceConfig,
    pub mode: Mode,
    /// Fit range `(t_lo, t_hi)`; `None` disables the fit.
    pub fit_range: Option<(f64, f64)>,
    pub input: PathBuf,
    pub input_kind: InputKind,
    pub windows: Option<PathBuf>,
    pub min_events: usize,
    pub out_dir: PathBuf,
    /// Recorded for reproducibility; the pipeline itself draws no random numbers.
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>, covariance: CovarianceConfig, mode: Mode) -> Self {
        RunConfig {
            covariance,
            mode,
            fit_range: None,
            input: input.into(),
            input_kind: InputKind::Events,
            windows: None,
            min_events: DEFAULT_MIN_EVENTS,
            out_dir: out_dir.into(),
            seed: None,
        }
    }

    /// The default power-law fit range for this grid.
    pub fn default_fit_range(&self) -> (f64, f64) {
        default_fit_range(self.covariance.delta, self.covariance.tau_max)
    }

    pub fn validate(&self) -> Result<()> {
        self.covariance.validate()?;
        if self.input_kind == InputKind::Prices && self.mode != Mode::TwoDBisym {
            return Err(HawkesError::invalid("price input yields up/down events and needs mode 2d-bisym"));
        }
        if let Some((lo, hi)) = self.fit_range {
            if !(lo > 0.0 && hi > lo) {
                return Err(HawkesError::invalid(format!("fit range must satisfy 0 < t_lo < t_hi, got {lo}:{hi}")));
            }
        }
        Ok(())
    }
}

/// Per-day intensity estimates (2D: the `Λ⁺` vs `Λ⁻` comparison).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayIntensity {
    pub label: String,
    pub events: usize,
    pub lambda: Vec<f64>,
    /// `max Λ / min Λ - 1` across components.
    pub imbalance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnFit {
    pub column: String,
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    /// Averaged (and in 2D symmetrized) covariance fed to the estimator.
    pub covariance: SampledMatrixFunction,
    pub lambda_bar: f64,
    /// `(v11 - v22, v12 - v21)` deviations of the averaged covariance, 2D only.
    pub bisymmetry: Option<(f64, f64)>,
    pub days: Vec<DayIntensity>,
    pub dropped: Vec<DroppedDay>,
    pub kernel: KernelEstimate,
    pub fits: Vec<ColumnFit>,
}

/// Diagnostics JSON written next to the artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub config: RunConfig,
    pub fingerprint: String,
    pub days_used: usize,
    pub days: Vec<DayIntensity>,
    pub dropped: Vec<DroppedDay>,
    pub lambda_bar: f64,
    pub bisymmetry: Option<(f64, f64)>,
    pub kernel: crate::spectral::EstimationDiagnostics,
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn stage<T>(name: &'static str, fp: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        already @ HawkesError::Stage { .. } => already,
        other => HawkesError::Stage { stage: name, fingerprint: fp.to_string(), source: Box::new(other) },
    })
}

/// Per-day covariances averaged over days; in 2D also checked and symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedCovariance {
    pub covariance: SampledMatrixFunction,
    /// `(v11 - v22, v12 - v21)` deviations before symmetrization, 2D only.
    pub bisymmetry: Option<(f64, f64)>,
    pub days: Vec<DayIntensity>,
}

impl AveragedCovariance {
    /// `λ̄` as the mean over components.
    pub fn lambda_bar(&self) -> f64 {
        let l = &self.covariance.lambda_bar;
        l.iter().sum::<f64>() / l.len() as f64
    }
}

pub fn average_days(
    days: &[(String, EventSeries)],
    cov_cfg: &CovarianceConfig,
    mode: Mode,
    fp: &str,
) -> Result<AveragedCovariance> {
    let n = mode.dimension();
    if days.is_empty() {
        return stage("covariance", fp, Err(HawkesError::invalid("no day windows left to estimate from")));
    }
    if let Some((label, s)) = days.iter().find(|(_, s)| s.n != n) {
        return stage("load", fp, Err(HawkesError::invalid(format!("day `{label}` has {} components, mode needs {n}", s.n))));
    }
    let per_day = stage(
        "covariance",
        fp,
        days.par_iter()
            .map(|(label, s)| {
                estimate_covariance(s, cov_cfg).map_err(|e| match e {
                    HawkesError::Validation(m) => HawkesError::invalid(format!("day `{label}`: {m}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>(),
    )?;
    let day_report = stage(
        "covariance",
        fp,
        days.iter()
            .map(|(label, s)| {
                let lambda = estimate_mean_intensity(s)?.lambda_bar;
                let hi = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = lambda.iter().copied().fold(f64::INFINITY, f64::min);
                let imbalance = if lo > 0.0 { hi / lo - 1.0 } else { f64::INFINITY };
                Ok(DayIntensity { label: label.clone(), events: s.total_events(), lambda, imbalance })
            })
            .collect::<Result<Vec<_>>>(),
    )?;
    let averaged = stage("average", fp, average_covariances(&per_day))?;
    let (covariance, bisymmetry) = match mode {
        Mode::OneD => (averaged, None),
        Mode::TwoDBisym => {
            let dev = stage("bisymmetry", fp, check_bisymmetry(&averaged))?;
            if dev.0 > 0.05 || dev.1 > 0.05 {
                log::warn!("averaged covariance is far from bisymmetric: deviations {:.3}, {:.3}", dev.0, dev.1);
            }
            (stage("bisymmetry", fp, symmetrize_bisym(&averaged))?, Some(dev))
        }
    };
    Ok(AveragedCovariance { covariance, bisymmetry, days: day_report })
}

/// Kernel estimate for `mode` from a (symmetrized) covariance.
pub fn estimate_kernel(cov: &SampledMatrixFunction, lambda_bar: f64, mode: Mode) -> Result<KernelEstimate> {
    if cov.n != mode.dimension() {
        return Err(HawkesError::Dimension { expected: mode.dimension(), got: cov.n });
    }
    match mode {
        Mode::OneD => estimate_kernel_1d(cov, lambda_bar),
        Mode::TwoDBisym => estimate_kernel_2d_bisym(cov, lambda_bar),
    }
}

/// Power-law fit of every kernel column over `[t_lo, t_hi]`.
pub fn fit_columns(kernel: &KernelEstimate, t_lo: f64, t_hi: f64) -> Result<Vec<ColumnFit>> {
    let times = kernel.times();
    kernel
        .columns
        .iter()
        .map(|(name, col)| Ok(ColumnFit { column: name.clone(), report: powerlaw_fit(&times, col, t_lo, t_hi)? }))
        .collect()
}

/// In-memory part of the pipeline, from per-day series to the kernel.
pub fn estimate_from_days(
    days: &[(String, EventSeries)],
    cov_cfg: &CovarianceConfig,
    mode: Mode,
    fit_range: Option<(f64, f64)>,
    fp: &str,
) -> Result<PipelineResult> {
    let avg = average_days(days, cov_cfg, mode, fp)?;
    let lambda_bar = avg.lambda_bar();
    let kernel = stage("estimate", fp, estimate_kernel(&avg.covariance, lambda_bar, mode))?;
    let fits = match fit_range {
        None => Vec::new(),
        Some((lo, hi)) => stage("fit", fp, fit_columns(&kernel, lo, hi))?,
    };
    Ok(PipelineResult {
        covariance: avg.covariance,
        lambda_bar,
        bisymmetry: avg.bisymmetry,
        days: avg.days,
        dropped: Vec::new(),
        kernel,
        fits,
    })
}

/// Loads the inputs named in `cfg`, returning labelled day series and the dropped days.
pub fn load_days(cfg: &RunConfig, fp: &str) -> Result<(Vec<(String, EventSeries)>, Vec<DroppedDay>)> {
    let n = cfg.mode.dimension();
    let series = stage(
        "load",
        fp,
        match cfg.input_kind {
            InputKind::Events => parse_events(&cfg.input, Some(n)).map(|p| p.series),
            InputKind::Prices => parse_prices(&cfg.input, None).and_then(|p| midprice_to_updown(&p)),
        },
    )?;
    match &cfg.windows {
        None => Ok((vec![("all".to_string(), series)], Vec::new())),
        Some(path) => {
            let windows = stage("window", fp, parse_windows(path))?;
            let split = stage("window", fp, window_and_split(&series, &windows, cfg.min_events))?;
            Ok((split.days, split.dropped))
        }
    }
}

fn input_fingerprint(cfg: &RunConfig) -> Result<String> {
    let mut bytes = std::fs::read(&cfg.input)?;
    if let Some(w) = &cfg.windows {
        bytes.extend(std::fs::read(w)?);
    }
    Ok(fingerprint(&bytes))
}

/// Runs the whole pipeline and writes `covariance.csv`, `kernel.csv` (each with
/// a JSON sidecar), `fit.json` when a fit range is set, and `diagnostics.json`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineResult> {
    let fp = stage("load", "-", input_fingerprint(cfg))?;
    stage("config", &fp, cfg.validate())?;
    let (days, dropped) = load_days(cfg, &fp)?;
    let mut result = estimate_from_days(&days, &cfg.covariance, cfg.mode, cfg.fit_range, &fp)?;
    result.dropped = dropped;
    stage("write", &fp, write_artifacts(cfg, &fp, &result))?;
    Ok(result)
}

pub fn write_artifacts(cfg: &RunConfig, fp: &str, result: &PipelineResult) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let out = |name: &str| -> PathBuf { cfg.out_dir.join(name) };
    write_covariance(&out("covariance.csv"), &result.covariance)?;
    write_kernel(&out("kernel.csv"), &result.kernel)?;
    if !result.fits.is_empty() {
        write_json(&out("fit.json"), &result.fits)?;
    }
    let diag = RunDiagnostics {
        config: cfg.clone(),
        fingerprint: fp.to_string(),
        days_used: result.days.len(),
        days: result.days.clone(),
        dropped: result.dropped.clone(),
        lambda_bar: result.lambda_bar,
        bisymmetry: result.bisymmetry,
        kernel: result.kernel.diagnostics.clone(),
    };
    write_json(&out("diagnostics.json"), &diag)
}
