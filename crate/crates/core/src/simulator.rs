//! Sample paths of stationary multivariate Hawkes processes by Ogata thinning.
//!
//! Exponential entries are tracked recursively. Other entries keep a per-source
//! history of event times, truncated at the lag where the kernel falls below
//! [`HISTORY_CUTOFF_RATIO`] of its value at zero (or at the end of its support).
//! The thinning bound is the sum of per-entry non-increasing envelopes
//! `sup_{u >= t} φ(u)`, so it remains valid until the next accepted event.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::events::EventSeries;
use crate::kernels::{BackgroundRate, KernelEntry, KernelSpec};

pub const RNG_ALGORITHM: &str = "ChaCha8Rng";
pub const HISTORY_CUTOFF_RATIO: f64 = 1e-8;
/// Default burn-in, in units of the slowest exponential decay time `1/β`.
pub const BURN_IN_DECAY_TIMES: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Length of the retained sample, seconds.
    pub horizon: f64,
    pub seed: u64,
    /// `None` picks the default for the kernel family.
    pub burn_in: Option<f64>,
    pub max_events: usize,
}

impl SimConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        SimConfig { horizon, seed, burn_in: None, max_events: 50_000_000 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(HawkesError::invalid(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if let Some(b) = self.burn_in {
            if !(b.is_finite() && b >= 0.0) {
                return Err(HawkesError::invalid(format!("burn_in must be >= 0, got {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub rng: String,
    pub seed: u64,
    pub horizon: f64,
    pub burn_in: f64,
    /// History truncation lag per entry `(i, j)`; `None` for exponential or zero entries.
    pub history_cutoff: Vec<Vec<Option<f64>>>,
    pub candidates: u64,
    pub accepted: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub events: EventSeries,
    pub meta: SimMetadata,
}

/// Default burn-in: `20 / min β` over the diagonal exponential entries (all
/// exponential entries if the diagonal has none); zero for other families.
pub fn default_burn_in(spec: &KernelSpec) -> Option<f64> {
    if !spec.is_exponential() {
        return None;
    }
    let rate = |e: &KernelEntry| match *e {
        KernelEntry::Exponential { alpha, beta } if alpha > 0.0 => Some(beta),
        _ => None,
    };
    let diag = (0..spec.n).filter_map(|i| rate(spec.entry(i, i))).fold(f64::INFINITY, f64::min);
    let slowest = if diag.is_finite() {
        diag
    } else {
        spec.entries.iter().flatten().filter_map(rate).fold(f64::INFINITY, f64::min)
    };
    Some(if slowest.is_finite() { BURN_IN_DECAY_TIMES / slowest } else { 0.0 })
}

/// Non-exponential entry: value, non-increasing envelope and support cutoff.
#[derive(Debug, Clone)]
struct GenericEntry {
    entry: KernelEntry,
    cutoff: f64,
    /// Suffix maxima of tabulated samples; empty for monotone families.
    suffix_max: Vec<f64>,
}

impl GenericEntry {
    fn new(entry: &KernelEntry) -> Option<Self> {
        match *entry {
            KernelEntry::PowerLaw { beta, gamma, .. } => Some(GenericEntry {
                entry: entry.clone(),
                cutoff: gamma * (HISTORY_CUTOFF_RATIO.powf(1.0 / beta) - 1.0),
                suffix_max: Vec::new(),
            }),
            KernelEntry::Tabulated { step, ref values } => {
                let mut suffix_max = values.clone();
                for k in (0..suffix_max.len().saturating_sub(1)).rev() {
                    suffix_max[k] = suffix_max[k].max(suffix_max[k + 1]);
                }
                Some(GenericEntry {
                    entry: entry.clone(),
                    cutoff: step * values.len().saturating_sub(1) as f64,
                    suffix_max,
                })
            }
            _ => None,
        }
    }

    #[inline]
    fn value_and_envelope(&self, lag: f64) -> (f64, f64) {
        let v = self.entry.value(lag);
        match self.entry {
            KernelEntry::Tabulated { step, .. } => {
                let k = (lag / step).floor() as usize + 1;
                let tail = self.suffix_max.get(k).copied().unwrap_or(0.0);
                (v, v.max(tail))
            }
            _ => (v, v),
        }
    }
}

/// Events per source kept in the exactly-summed recent partition after a refresh.
const RECENT_EVENTS: usize = 256;

/// Conditional intensity evaluator shared by the simulator and [`intensity_trace`].
///
/// Generic histories are split into an old prefix, whose contribution is cached
/// at the last refresh, and a recent suffix summed exactly on every call. The
/// cached part gives cheap lower and upper bounds on the intensity; thinning only
/// pays for an exact sum when the uniform draw falls between them.
pub(crate) struct IntensityState {
    n: usize,
    mu: Vec<f64>,
    /// `(alpha, beta)` per entry `i * n + j`.
    exp: Vec<Option<(f64, f64)>>,
    exp_level: Vec<f64>,
    last_time: f64,
    generic: Vec<Option<GenericEntry>>,
    history: Vec<VecDeque<f64>>,
    source_cutoff: Vec<f64>,
    refreshed_at: f64,
    old_len: Vec<usize>,
    /// Smallest lag of an old event at `refreshed_at`, per source.
    old_gap: Vec<f64>,
    old_value: Vec<f64>,
    old_env: Vec<f64>,
}

pub(crate) struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub bound: f64,
}

impl Bounds {
    fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

impl IntensityState {
    pub(crate) fn new(spec: &KernelSpec, mu: &[f64], t0: f64) -> Self {
        let n = spec.n;
        let mut exp = vec![None; n * n];
        let mut generic = vec![None; n * n];
        let mut source_cutoff = vec![f64::NEG_INFINITY; n];
        for i in 0..n {
            for j in 0..n {
                let e = spec.entry(i, j);
                if e.is_zero() {
                    continue;
                }
                match *e {
                    KernelEntry::Exponential { alpha, beta } => exp[i * n + j] = Some((alpha, beta)),
                    _ => {
                        let g = GenericEntry::new(e).expect("non-exponential entry");
                        source_cutoff[j] = source_cutoff[j].max(g.cutoff);
                        generic[i * n + j] = Some(g);
                    }
                }
            }
        }
        IntensityState {
            n,
            mu: mu.to_vec(),
            exp,
            exp_level: vec![0.0; n * n],
            last_time: t0,
            generic,
            history: vec![VecDeque::new(); n],
            source_cutoff,
            refreshed_at: t0,
            old_len: vec![0; n],
            old_gap: vec![f64::INFINITY; n],
            old_value: vec![0.0; n * n],
            old_env: vec![0.0; n * n],
        }
    }

    pub(crate) fn cutoffs(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.generic[i * self.n + j].as_ref().map(|g| g.cutoff)).collect())
            .collect()
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.last_time;
        if dt > 0.0 {
            for (level, e) in self.exp_level.iter_mut().zip(&self.exp) {
                if let Some((_, beta)) = e {
                    *level *= (-beta * dt).exp();
                }
            }
            self.last_time = t;
        }
    }

    /// Drops expired history and re-caches the old partition at `t`.
    fn refresh(&mut self, t: f64) {
        let n = self.n;
        for (j, hist) in self.history.iter_mut().enumerate() {
            let cutoff = self.source_cutoff[j];
            while hist.front().is_some_and(|&s| t - s > cutoff) {
                hist.pop_front();
            }
            let old = hist.len().saturating_sub(RECENT_EVENTS);
            self.old_len[j] = old;
            self.old_gap[j] = if old > 0 { t - hist[old - 1] } else { f64::INFINITY };
        }
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let (mut value, mut env) = (0.0, 0.0);
                if let Some(g) = &self.generic[idx] {
                    for &s in self.history[j].range(..self.old_len[j]) {
                        let lag = t - s;
                        if lag <= g.cutoff {
                            let (v, e) = g.value_and_envelope(lag);
                            value += v;
                            env += e;
                        }
                    }
                }
                self.old_value[idx] = value;
                self.old_env[idx] = env;
            }
        }
        self.refreshed_at = t;
    }

    /// Lower and upper bounds on each `λ^i(t)` plus the thinning bound, which
    /// stays valid until the next recorded event. Exact right after a refresh.
    pub(crate) fn bounds(&mut self, t: f64) -> Bounds {
        let n = self.n;
        self.advance(t);
        if self.history.iter().zip(&self.old_len).any(|(h, &o)| h.len() - o > 2 * RECENT_EVENTS) {
            self.refresh(t);
        }
        let d = t - self.refreshed_at;
        let mut lower = self.mu.clone();
        let mut upper = self.mu.clone();
        let mut bound = self.mu.iter().sum::<f64>();
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                if self.exp[idx].is_some() {
                    lower[i] += self.exp_level[idx];
                    upper[i] += self.exp_level[idx];
                    bound += self.exp_level[idx];
                } else if let Some(g) = &self.generic[idx] {
                    let mut recent = 0.0;
                    for &s in self.history[j].range(self.old_len[j]..) {
                        let lag = t - s;
                        if lag > g.cutoff {
                            continue;
                        }
                        let (v, env) = g.value_and_envelope(lag);
                        recent += v;
                        bound += env;
                    }
                    let (lo, hi) = if d == 0.0 {
                        (self.old_value[idx], self.old_value[idx])
                    } else {
                        self.old_range(idx, j, d)
                    };
                    lower[i] += recent + lo;
                    upper[i] += recent + hi;
                    bound += self.old_env[idx];
                }
            }
        }
        Bounds { lower, upper, bound }
    }

    /// Range of the old partition's contribution `d` seconds after the refresh.
    /// Power laws decay by at least `((L+γ+d)/(L+γ))^β` for lags `>= L`; events
    /// crossing the cutoff lose at most `φ(cutoff)` each.
    fn old_range(&self, idx: usize, j: usize, d: f64) -> (f64, f64) {
        let g = self.generic[idx].as_ref().expect("generic entry");
        match g.entry {
            KernelEntry::PowerLaw { beta, gamma, .. } => {
                let gap = self.old_gap[j];
                let ratio = ((gap + gamma + d) / (gap + gamma)).powf(beta);
                let dropped = self.old_len[j] as f64 * g.entry.value(g.cutoff);
                ((self.old_value[idx] * ratio - dropped).max(0.0), self.old_value[idx])
            }
            _ => (0.0, self.old_env[idx]),
        }
    }

    /// Exact intensities at `t` (must not precede the last call).
    /// Events recorded at exactly `t` are included.
    pub(crate) fn evaluate(&mut self, t: f64) -> Vec<f64> {
        self.advance(t);
        self.refresh(t);
        self.bounds(t).lower
    }

    /// Adds an event of `component` at `t` (the last evaluated time).
    pub(crate) fn record(&mut self, component: usize, t: f64) {
        let n = self.n;
        for i in 0..n {
            if let Some((alpha, _)) = self.exp[i * n + component] {
                self.exp_level[i * n + component] += alpha;
            }
        }
        if self.source_cutoff[component] > f64::NEG_INFINITY {
            self.history[component].push_back(t);
        }
    }
}

/// Thinning outcome for a draw `v` against intensity bounds: `Some(Some(i))`
/// accepts component `i`, `Some(None)` rejects, `None` is undecided.
fn decide(v: f64, lower: &[f64], upper: &[f64]) -> Option<Option<usize>> {
    if v >= upper.iter().sum::<f64>() {
        return Some(None);
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for i in 0..lower.len() {
        lo += lower[i];
        hi += upper[i];
        if v < lo {
            return Some(Some(i));
        }
        if v < hi {
            return None;
        }
    }
    None
}

/// Simulates `spec` with background `mu` on `[0, horizon]`, discarding a burn-in prefix.
pub fn simulate(spec: &KernelSpec, mu: &BackgroundRate, cfg: &SimConfig) -> Result<Simulation> {
    spec.validate()?;
    cfg.validate()?;
    if mu.len() != spec.n {
        return Err(HawkesError::Dimension { expected: spec.n, got: mu.len() });
    }
    let rho = spec.spectral_radius()?;
    if rho >= 1.0 {
        return Err(HawkesError::NotStationary(rho));
    }

    let mut warnings = Vec::new();
    let burn_in = match cfg.burn_in {
        Some(b) => b,
        None => match default_burn_in(spec) {
            Some(b) => b,
            None => {
                let msg = "non-exponential kernel: no default burn-in, simulation starts from an empty history".to_string();
                log::warn!("{msg}");
                warnings.push(msg);
                0.0
            }
        },
    };

    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = IntensityState::new(spec, mu.as_slice(), -burn_in);
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut t = -burn_in;
    let mut candidates = 0u64;
    let mut accepted = 0u64;
    let mut bound = state.bounds(t).bound;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / bound;
        if t > cfg.horizon {
            break;
        }
        candidates += 1;
        let b = state.bounds(t);
        let v: f64 = rng.random::<f64>() * bound;
        let outcome = match decide(v, &b.lower, &b.upper) {
            Some(o) => o,
            None => {
                debug_assert!(!b.is_exact());
                let exact = state.evaluate(t);
                decide(v, &exact, &exact).unwrap_or(Some(n - 1))
            }
        };
        let Some(pick) = outcome else {
            bound = b.bound;
            continue;
        };
        // Floating-point ties with the previous event are vanishingly rare;
        // skip them so timestamps stay strictly increasing.
        if out[pick].last().is_none_or(|&last| t > last) {
            state.record(pick, t);
            accepted += 1;
            if t >= 0.0 {
                out[pick].push(t);
            }
            if accepted as usize > cfg.max_events {
                return Err(HawkesError::TooManyEvents(cfg.max_events));
            }
        }
        bound = state.bounds(t).bound;
    }

    let cutoffs = state.cutoffs();
    let events = EventSeries { n, events: out, t_start: 0.0, t_end: cfg.horizon };
    Ok(Simulation {
        events,
        meta: SimMetadata {
            rng: RNG_ALGORITHM.to_string(),
            seed: cfg.seed,
            horizon: cfg.horizon,
            burn_in,
            history_cutoff: cutoffs,
            candidates,
            accepted,
            warnings,
        },
    })
}

/// Conditional intensity on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityTrace {
    pub t0: f64,
    pub step: f64,
    /// `values[i][k]` is `λ^i` at `t0 + k·step`.
    pub values: Vec<Vec<f64>>,
}

impl IntensityTrace {
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }
}

/// Evaluates `λ_t = μ + Σ φ(t - t_k)` over past events (strictly before `t`)
/// on the grid `t_start + k·step` covering the event window.
pub fn intensity_trace(
    spec: &KernelSpec,
    mu: &BackgroundRate,
    events: &EventSeries,
    step: f64,
) -> Result<IntensityTrace> {
    spec.validate()?;
    if !(step.is_finite() && step > 0.0) {
        return Err(HawkesError::invalid(format!("grid step must be > 0, got {step}")));
    }
    if events.n != spec.n || mu.len() != spec.n {
        return Err(HawkesError::Dimension { expected: spec.n, got: events.n });
    }
    let n = spec.n;
    let len = (events.duration() / step).floor() as usize + 1;
    let mut state = IntensityState::new(spec, mu.as_slice(), events.t_start);
    let merged = events.merged();
    let mut next = 0;
    let mut values = vec![Vec::with_capacity(len); n];
    for k in 0..len {
        let t = events.t_start + k as f64 * step;
        while next < merged.len() && merged[next].1 < t {
            let (c, s) = merged[next];
            state.evaluate(s);
            state.record(c, s);
            next += 1;
        }
        for (i, l) in state.evaluate(t).into_iter().enumerate() {
            values[i].push(l);
        }
    }
    Ok(IntensityTrace { t0: events.t_start, step, values })
}
