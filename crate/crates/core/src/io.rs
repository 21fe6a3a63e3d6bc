//! File formats: event and price CSVs, day windows, covariance and kernel
//! CSVs with JSON sidecars. All writes go through a temp file and a rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covariance::SampledMatrixFunction;
use crate::error::{HawkesError, Result};
use crate::events::EventSeries;
use crate::spectral::{EstimationDiagnostics, KernelEstimate};

/// Default "too few events" threshold per day window.
pub const DEFAULT_MIN_EVENTS: usize = 100;

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| HawkesError::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// `x.csv` → `x.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> HawkesError {
    HawkesError::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn check_header(path: &Path, reader: &mut csv::Reader<fs::File>, want: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != want {
        return Err(parse_err(path, 1, format!("expected header `{}`, got `{}`", want.join(","), got.join(","))));
    }
    Ok(())
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path)?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = rec.get(idx).ok_or_else(|| parse_err(path, line, format!("missing {name}")))?;
    raw.parse().map_err(|_| parse_err(path, line, format!("bad {name} `{raw}`")))
}

fn float_field(path: &Path, line: usize, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let x: f64 = field(path, line, rec, idx, name)?;
    if !x.is_finite() {
        return Err(parse_err(path, line, format!("non-finite {name}")));
    }
    Ok(x)
}

/// An event file as read, with the warnings raised while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEvents {
    pub series: EventSeries,
    /// Rows were out of time order and have been sorted.
    pub sorted: bool,
    /// Timestamps shared across components.
    pub cross_component_ties: usize,
}

/// Reads `component,timestamp` rows (components numbered from 1).
///
/// The window is `[min(0, first event), last event]`. With `declared_n`, rows
/// naming a higher component are rejected; otherwise `n` is the largest
/// component seen.
pub fn parse_events(path: &Path, declared_n: Option<usize>) -> Result<ParsedEvents> {
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, &["component", "timestamp"])?;
    let mut rows: Vec<(usize, f64, usize)> = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 fields, got {}", rec.len())));
        }
        let c: usize = field(path, line, &rec, 0, "component")?;
        let t = float_field(path, line, &rec, 1, "timestamp")?;
        if c == 0 {
            return Err(parse_err(path, line, "components are numbered from 1"));
        }
        if let Some(n) = declared_n {
            if c > n {
                return Err(parse_err(path, line, format!("component {c} exceeds declared dimension {n}")));
            }
        }
        rows.push((c - 1, t, line));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no events"));
    }
    let n = declared_n.unwrap_or_else(|| rows.iter().map(|r| r.0 + 1).max().expect("non-empty"));
    let mut sorted = false;
    let mut events: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    for &(c, t, line) in &rows {
        if events[c].last().is_some_and(|&(prev, _)| t < prev) {
            sorted = true;
        }
        events[c].push((t, line));
    }
    if sorted {
        log::warn!("{}: rows were not in time order; sorted", path.display());
        for e in &mut events {
            e.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }
    for (c, e) in events.iter().enumerate() {
        if let Some(w) = e.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(parse_err(
                path,
                w[1].1,
                format!("duplicate timestamp {} in component {} (also line {})", w[1].0, c + 1, w[0].1),
            ));
        }
    }
    let first = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let last = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let times: Vec<Vec<f64>> = events.into_iter().map(|e| e.into_iter().map(|(t, _)| t).collect()).collect();
    let series = EventSeries::new(times, first.min(0.0), last)?;
    let ties = series.cross_component_ties();
    if ties > 0 {
        log::warn!("{}: {ties} timestamps shared across components", path.display());
    }
    Ok(ParsedEvents { series, sorted, cross_component_ties: ties })
}

/// Writes events as `component,timestamp`, merged in time order.
pub fn write_events(path: &Path, series: &EventSeries) -> Result<()> {
    let mut out = String::from("component,timestamp\n");
    for (c, t) in series.merged() {
        out.push_str(&format!("{},{}\n", c + 1, t));
    }
    atomic_write(path, out.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub timestamps: Vec<f64>,
    pub prices: Vec<f64>,
    pub tick_size: f64,
}

impl PriceSeries {
    /// Timestamps must be non-decreasing; repeated timestamps (simultaneous
    /// quote updates) are kept as they are.
    pub fn new(timestamps: Vec<f64>, prices: Vec<f64>, tick_size: f64) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(HawkesError::invalid("timestamps and prices differ in length"));
        }
        if !(tick_size.is_finite() && tick_size > 0.0) {
            return Err(HawkesError::invalid(format!("tick size must be > 0, got {tick_size}")));
        }
        if let Some(i) = timestamps.iter().chain(&prices).position(|x| !x.is_finite()) {
            return Err(HawkesError::invalid(format!("non-finite value at position {i}")));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] < w[0]) {
            return Err(HawkesError::invalid(format!("timestamps decrease at row {}", i + 2)));
        }
        Ok(PriceSeries { timestamps, prices, tick_size })
    }

    /// Number of rows sharing a timestamp with the previous row.
    pub fn simultaneous(&self) -> usize {
        self.timestamps.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// Reads `timestamp,price`. Without `tick_size`, the smallest nonzero price
/// change is used (1 if the price never moves).
pub fn parse_prices(path: &Path, tick_size: Option<f64>) -> Result<PriceSeries> {
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, &["timestamp", "price"])?;
    let mut ts = Vec::new();
    let mut px = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 fields, got {}", rec.len())));
        }
        let t = float_field(path, line, &rec, 0, "timestamp")?;
        if ts.last().is_some_and(|&prev| t < prev) {
            return Err(parse_err(path, line, "timestamps must be non-decreasing"));
        }
        ts.push(t);
        px.push(float_field(path, line, &rec, 1, "price")?);
    }
    if ts.is_empty() {
        return Err(parse_err(path, 1, "no prices"));
    }
    let tick = tick_size.unwrap_or_else(|| {
        let min = px.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            min
        } else {
            1.0
        }
    });
    let series = PriceSeries::new(ts, px, tick)?;
    if series.simultaneous() > 0 {
        log::warn!("{}: {} price updates share a timestamp; ingested as-is", path.display(), series.simultaneous());
    }
    Ok(series)
}

/// Up-moves to component 1, down-moves to component 2, one event per change
/// whatever its size. A second same-direction change at an identical
/// timestamp is dropped (the counting processes have unit jumps).
pub fn midprice_to_updown(prices: &PriceSeries) -> Result<EventSeries> {
    let mut up: Vec<f64> = Vec::new();
    let mut down: Vec<f64> = Vec::new();
    let mut dropped = 0;
    for (w, &t) in prices.prices.windows(2).zip(prices.timestamps.iter().skip(1)) {
        let target = if w[1] > w[0] {
            &mut up
        } else if w[1] < w[0] {
            &mut down
        } else {
            continue;
        };
        if target.last() == Some(&t) {
            dropped += 1;
        } else {
            target.push(t);
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} same-direction price changes at repeated timestamps dropped");
    }
    let (start, end) = match (prices.timestamps.first(), prices.timestamps.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 0.0),
    };
    EventSeries::new(vec![up, down], start, end)
}

/// One observation window, in the same absolute seconds as the event timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayWindow {
    pub label: String,
    pub start: f64,
    pub end: f64,
}

impl DayWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite() && self.start < self.end) {
            return Err(HawkesError::invalid(format!(
                "window `{}` needs start < end, got [{}, {}]",
                self.label, self.start, self.end
            )));
        }
        Ok(())
    }
}

pub fn parse_windows(path: &Path) -> Result<Vec<DayWindow>> {
    let windows: Vec<DayWindow> = read_json(path)?;
    if windows.is_empty() {
        return Err(HawkesError::invalid(format!("{}: no windows", path.display())));
    }
    Ok(windows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedDay {
    pub label: String,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDays {
    /// `(label, events rebased to the window start)`, in window order.
    pub days: Vec<(String, EventSeries)>,
    pub dropped: Vec<DroppedDay>,
}

/// Cuts `events` into the given windows, rebasing each to `t = 0` and dropping
/// windows with fewer than `min_events` events in total.
pub fn window_and_split(events: &EventSeries, windows: &[DayWindow], min_events: usize) -> Result<SplitDays> {
    for w in windows {
        w.validate()?;
    }
    let mut order: Vec<&DayWindow> = windows.iter().collect();
    order.sort_by(|a, b| a.start.total_cmp(&b.start));
    for pair in order.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(HawkesError::invalid(format!(
                "windows `{}` and `{}` overlap",
                pair[0].label, pair[1].label
            )));
        }
    }
    let mut days = Vec::new();
    let mut dropped = Vec::new();
    for w in windows {
        let day = events.slice_rebased(w.start, w.end);
        let count = day.total_events();
        if count < min_events {
            log::info!("dropping window `{}`: {count} events < {min_events}", w.label);
            dropped.push(DroppedDay { label: w.label.clone(), events: count });
        } else {
            days.push((w.label.clone(), day));
        }
    }
    Ok(SplitDays { days, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSidecar {
    pub h: f64,
    pub delta: f64,
    pub tau_max: f64,
    pub n: usize,
    pub lambda_bar: Vec<f64>,
}

fn matrix_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).flat_map(|i| (1..=n).map(move |j| format!("{prefix}{i}{j}"))).collect()
}

/// `lag,v11,v12,...` for lags `-K..=K`, plus the `.json` sidecar.
pub fn write_covariance(path: &Path, cov: &SampledMatrixFunction) -> Result<()> {
    let mut out = format!("lag,{}\n", matrix_header("v", cov.n).join(","));
    let nn = cov.n * cov.n;
    for (idx, block) in cov.values.chunks(nn).enumerate() {
        let k = idx as isize - cov.lags as isize;
        out.push_str(&cov.lag(k).to_string());
        for v in block {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())?;
    let side = CovarianceSidecar {
        h: cov.h,
        delta: cov.delta,
        tau_max: cov.tau_max(),
        n: cov.n,
        lambda_bar: cov.lambda_bar.clone(),
    };
    write_json(&sidecar_path(path), &side)
}

pub fn read_covariance(path: &Path) -> Result<SampledMatrixFunction> {
    let side: CovarianceSidecar = read_json(&sidecar_path(path))?;
    if side.n == 0 || side.lambda_bar.len() != side.n {
        return Err(HawkesError::invalid(format!("{}: sidecar n and lambda_bar disagree", path.display())));
    }
    let lags = (side.tau_max / side.delta).round() as usize;
    let mut reader = open_csv(path)?;
    let header: Vec<String> = std::iter::once("lag".to_string()).chain(matrix_header("v", side.n)).collect();
    let want: Vec<&str> = header.iter().map(String::as_str).collect();
    check_header(path, &mut reader, &want)?;
    let mut cov = SampledMatrixFunction::zeros(side.n, side.h, side.delta, lags, side.lambda_bar);
    let mut rows = 0;
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        if rec.len() != want.len() {
            return Err(parse_err(path, line, format!("expected {} fields, got {}", want.len(), rec.len())));
        }
        if idx >= cov.len() {
            return Err(parse_err(path, line, format!("more than {} lag rows", cov.len())));
        }
        let lag = float_field(path, line, &rec, 0, "lag")?;
        let k = idx as isize - lags as isize;
        if (lag - cov.lag(k)).abs() > 1e-9 * side.delta.max(lag.abs()) {
            return Err(parse_err(path, line, format!("lag {lag} does not match grid value {}", cov.lag(k))));
        }
        for i in 0..side.n {
            for j in 0..side.n {
                let v = float_field(path, line, &rec, 1 + i * side.n + j, "value")?;
                cov.set(k, i, j, v);
            }
        }
        rows += 1;
    }
    if rows != cov.len() {
        return Err(HawkesError::GridMismatch(format!(
            "{}: {rows} rows, sidecar implies {}",
            path.display(),
            cov.len()
        )));
    }
    Ok(cov)
}

/// Kernel sidecar: estimation diagnostics under their file-format names.
pub type KernelSidecar = EstimationDiagnostics;

/// `t,phi11[,phi12,...]` for `t = 0..=τ_max`, plus the `.json` sidecar.
pub fn write_kernel(path: &Path, est: &KernelEstimate) -> Result<()> {
    let names: Vec<&str> = est.columns.iter().map(|(n, _)| n.as_str()).collect();
    let mut out = format!("t,{}\n", names.join(","));
    for (k, t) in est.times().iter().enumerate() {
        out.push_str(&t.to_string());
        for (_, col) in &est.columns {
            out.push(',');
            out.push_str(&col[k].to_string());
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())?;
    write_json(&sidecar_path(path), &est.diagnostics)
}

pub fn read_kernel(path: &Path) -> Result<KernelEstimate> {
    let diagnostics: KernelSidecar = read_json(&sidecar_path(path))?;
    let mut reader = open_csv(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() < 2 || header[0] != "t" || !header[1..].iter().all(|h| h.starts_with("phi")) {
        return Err(parse_err(path, 1, format!("expected header `t,phi11[,...]`, got `{}`", header.join(","))));
    }
    let mut times = Vec::new();
    let mut columns: Vec<(String, Vec<f64>)> = header[1..].iter().map(|h| (h.clone(), Vec::new())).collect();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(parse_err(path, line, format!("expected {} fields, got {}", header.len(), rec.len())));
        }
        times.push(float_field(path, line, &rec, 0, "t")?);
        for (c, col) in columns.iter_mut().enumerate() {
            col.1.push(float_field(path, line, &rec, c + 1, "phi")?);
        }
    }
    if times.len() < 2 {
        return Err(parse_err(path, 1, "kernel needs at least two rows"));
    }
    let delta = times[1] - times[0];
    Ok(KernelEstimate { delta, lags: times.len() - 1, columns, diagnostics })
}

/// Generic numeric CSV with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}
