//! C ABI over `hawkes_spectral`.
//!
//! Objects cross the boundary as opaque handles created by `hs_*_new`-style
//! functions and released with the matching `hs_*_free`. Every fallible call
//! returns an [`HsStatus`]; on failure [`hs_last_error`] describes it. Panics
//! are caught at the boundary and reported as [`HsStatus::Panic`].
//!
//! Components are numbered from 1 on this side, as in the CSV formats.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hawkes_spectral::analysis::powerlaw_fit;
use hawkes_spectral::covariance::{estimate_covariance, CovarianceConfig, SampledMatrixFunction};
use hawkes_spectral::events::EventSeries;
use hawkes_spectral::pipeline::{estimate_kernel, Mode};
use hawkes_spectral::simulator::{simulate, SimConfig};
use hawkes_spectral::spectral::KernelEstimate;
use hawkes_spectral::{HawkesError, HawkesModel};

/// Result codes; 2 and 3 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    /// Invalid input: malformed JSON, bad parameters, non-stationary kernel.
    Validation = 2,
    /// Singular matrices, unmet tolerances, simulation caps.
    Numerical = 3,
    NullPointer = 4,
    /// A caller buffer is smaller than the data to copy.
    BufferTooSmall = 5,
    Panic = 6,
}

/// Estimator modes, passed as `uint32_t`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsMode {
    Scalar = 1,
    Bisymmetric = 2,
}

fn mode_from(raw: u32) -> Result<Mode, Failure> {
    match raw {
        x if x == HsMode::Scalar as u32 => Ok(Mode::OneD),
        x if x == HsMode::Bisymmetric as u32 => Ok(Mode::TwoDBisym),
        other => Err(HawkesError::Validation(format!("unknown mode {other}")).into()),
    }
}

/// Kernel matrix plus background rate.
pub struct HsModel(HawkesModel);

pub struct HsEvents(EventSeries);

pub struct HsCovariance(SampledMatrixFunction);

pub struct HsKernel(KernelEstimate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Failure {
    Hawkes(HawkesError),
    Null(&'static str),
    Buffer { needed: usize, got: usize },
}

impl From<HawkesError> for Failure {
    fn from(e: HawkesError) -> Self {
        Failure::Hawkes(e)
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(Failure::Hawkes(e))) => {
            let status = if e.exit_code() == 3 { HsStatus::Numerical } else { HsStatus::Validation };
            set_error(e.to_string());
            status
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            HsStatus::NullPointer
        }
        Ok(Err(Failure::Buffer { needed, got })) => {
            set_error(format!("buffer holds {got} values, {needed} needed"));
            HsStatus::BufferTooSmall
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("panic: {msg}"));
            HsStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if len < src.len() {
        return Err(Failure::Buffer { needed: src.len(), got: len });
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a model from JSON such as
/// `{"n":1,"entries":[[{"type":"exp","alpha":1,"beta":4}]],"mu":[1]}`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_model_from_json(json: *const c_char, out: *mut *mut HsModel) -> HsStatus {
    guard(|| {
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| HawkesError::Validation(format!("model JSON is not UTF-8: {e}")))?;
        put(out, HsModel(HawkesModel::from_json(text)?))
    })
}

/// Number of components of `model`, or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_model_dimension(model: *const HsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.kernel.n)
}

/// Writes the stationary mean intensities `Λ` into `buf[0..n]`.
///
/// # Safety
/// `model` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_model_mean_intensity(model: *const HsModel, buf: *mut f64, len: usize) -> HsStatus {
    guard(|| {
        let m = get(model, "model")?;
        copy_out(&m.0.mean_intensity()?.lambda_bar, buf, len)
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_model_free(model: *mut HsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Simulates `model` on `[0, horizon]` with the default burn-in.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_simulate(
    model: *const HsModel,
    horizon: f64,
    seed: u64,
    out: *mut *mut HsEvents,
) -> HsStatus {
    guard(|| {
        let m = get(model, "model")?;
        let sim = simulate(&m.0.kernel, &m.0.mu, &SimConfig::new(horizon, seed))?;
        put(out, HsEvents(sim.events))
    })
}

/// Builds an `n`-component series from parallel arrays of 1-based components
/// and timestamps, observed on `[t_start, t_end]`.
///
/// # Safety
/// `components` and `times` must each hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_events_new(
    n: usize,
    components: *const u32,
    times: *const f64,
    len: usize,
    t_start: f64,
    t_end: f64,
    out: *mut *mut HsEvents,
) -> HsStatus {
    guard(|| {
        let comps = slice(components, len, "components")?;
        let times = slice(times, len, "times")?;
        let mut per = vec![Vec::new(); n];
        for (row, (&c, &t)) in comps.iter().zip(times).enumerate() {
            let c = c as usize;
            if c == 0 || c > n {
                return Err(HawkesError::Validation(format!("row {row}: component {c} outside 1..={n}")).into());
            }
            per[c - 1].push(t);
        }
        for v in &mut per {
            v.sort_by(f64::total_cmp);
        }
        put(out, HsEvents(EventSeries::new(per, t_start, t_end)?))
    })
}

/// Number of components, or 0 for null.
///
/// # Safety
/// `events` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_events_dimension(events: *const HsEvents) -> usize {
    events.as_ref().map_or(0, |e| e.0.n)
}

/// Event count of a 1-based component; 0 for null or out-of-range input.
///
/// # Safety
/// `events` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_events_count(events: *const HsEvents, component: usize) -> usize {
    match events.as_ref() {
        Some(e) if component >= 1 && component <= e.0.n => e.0.count(component - 1),
        _ => 0,
    }
}

/// Copies the timestamps of a 1-based component into `buf`.
///
/// # Safety
/// `events` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_events_copy(
    events: *const HsEvents,
    component: usize,
    buf: *mut f64,
    len: usize,
) -> HsStatus {
    guard(|| {
        let e = get(events, "events")?;
        if component == 0 || component > e.0.n {
            return Err(HawkesError::Validation(format!("component {component} outside 1..={}", e.0.n)).into());
        }
        copy_out(&e.0.events[component - 1], buf, len)
    })
}

/// # Safety
/// `events` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_events_free(events: *mut HsEvents) {
    if !events.is_null() {
        drop(Box::from_raw(events));
    }
}

/// Binned covariance `v^(h)` at lags `0..=tau_max` in steps of `delta`.
///
/// # Safety
/// `events` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_covariance_estimate(
    events: *const HsEvents,
    h: f64,
    delta: f64,
    tau_max: f64,
    out: *mut *mut HsCovariance,
) -> HsStatus {
    guard(|| {
        let e = get(events, "events")?;
        let cfg = CovarianceConfig { h, delta, tau_max };
        put(out, HsCovariance(estimate_covariance(&e.0, &cfg)?))
    })
}

/// Mean of the per-component intensities recorded with the covariance; NaN for null.
///
/// # Safety
/// `cov` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_covariance_lambda_bar(cov: *const HsCovariance) -> f64 {
    cov.as_ref().map_or(f64::NAN, |c| c.0.lambda_bar.iter().sum::<f64>() / c.0.n as f64)
}

/// # Safety
/// `cov` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_covariance_free(cov: *mut HsCovariance) {
    if !cov.is_null() {
        drop(Box::from_raw(cov));
    }
}

/// Kernel estimate from a covariance, with `λ̄` taken from the covariance.
/// `mode` is an [`HsMode`] value.
///
/// # Safety
/// `cov` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_estimate(cov: *const HsCovariance, mode: u32, out: *mut *mut HsKernel) -> HsStatus {
    guard(|| {
        let c = get(cov, "cov")?;
        let mode = mode_from(mode)?;
        let lambda_bar = c.0.lambda_bar.iter().sum::<f64>() / c.0.n as f64;
        put(out, HsKernel(estimate_kernel(&c.0, lambda_bar, mode)?))
    })
}

/// Samples per column (lags `0..=K`), or 0 for null.
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_len(kernel: *const HsKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.0.lags + 1)
}

/// Column count: 1 in 1D (`phi11`), 2 for bisymmetric 2D (`phi11`, `phi12`).
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_columns(kernel: *const HsKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.0.columns.len())
}

/// Lag step of the estimate; NaN for null.
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_delta(kernel: *const HsKernel) -> f64 {
    kernel.as_ref().map_or(f64::NAN, |k| k.0.delta)
}

/// Copies column `index` (0-based) into `buf`.
///
/// # Safety
/// `kernel` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_copy_column(
    kernel: *const HsKernel,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> HsStatus {
    guard(|| {
        let k = get(kernel, "kernel")?;
        let (_, col) = k
            .0
            .columns
            .get(index)
            .ok_or_else(|| HawkesError::Validation(format!("column {index} out of range")))?;
        copy_out(col, buf, len)
    })
}

/// # Safety
/// `kernel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_free(kernel: *mut HsKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Log-log least-squares fit `v ≈ α t^β` over `[t_lo, t_hi]`.
///
/// # Safety
/// `times` and `values` must hold `len` doubles; `alpha` and `beta` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_powerlaw_fit(
    times: *const f64,
    values: *const f64,
    len: usize,
    t_lo: f64,
    t_hi: f64,
    alpha: *mut f64,
    beta: *mut f64,
) -> HsStatus {
    guard(|| {
        let t = slice(times, len, "times")?;
        let v = slice(values, len, "values")?;
        if alpha.is_null() || beta.is_null() {
            return Err(Failure::Null("alpha/beta"));
        }
        let fit = powerlaw_fit(t, v, t_lo, t_hi)?;
        *alpha = fit.alpha;
        *beta = fit.beta;
        Ok(())
    })
}
