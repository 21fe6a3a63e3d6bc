use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};

/// Per-component sorted event timestamps observed on `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    pub n: usize,
    pub events: Vec<Vec<f64>>,
    pub t_start: f64,
    pub t_end: f64,
}

impl EventSeries {
    /// Validates ordering (strictly increasing per component) and window membership.
    pub fn new(events: Vec<Vec<f64>>, t_start: f64, t_end: f64) -> Result<Self> {
        if events.is_empty() {
            return Err(HawkesError::invalid("event series needs at least one component"));
        }
        if !(t_start.is_finite() && t_end.is_finite() && t_end >= t_start) {
            return Err(HawkesError::invalid(format!("bad window [{t_start}, {t_end}]")));
        }
        for (c, times) in events.iter().enumerate() {
            for w in times.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(HawkesError::invalid(format!(
                        "component {}: timestamps not strictly increasing ({} then {})",
                        c + 1,
                        w[0],
                        w[1]
                    )));
                }
            }
            if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
                if !first.is_finite() || !last.is_finite() || first < t_start || last > t_end {
                    return Err(HawkesError::invalid(format!(
                        "component {}: events outside window [{t_start}, {t_end}]",
                        c + 1
                    )));
                }
            }
        }
        Ok(EventSeries { n: events.len(), events, t_start, t_end })
    }

    pub fn empty(n: usize, t_start: f64, t_end: f64) -> Self {
        EventSeries { n, events: vec![Vec::new(); n], t_start, t_end }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn count(&self, component: usize) -> usize {
        self.events[component].len()
    }

    pub fn total_events(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    /// Number of timestamps shared by two or more components.
    pub fn cross_component_ties(&self) -> usize {
        if self.n < 2 {
            return 0;
        }
        let mut all: Vec<f64> = self.events.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Events restricted to `[start, end)` and shifted so that `start` maps to 0.
    pub fn slice_rebased(&self, start: f64, end: f64) -> EventSeries {
        let events = self
            .events
            .iter()
            .map(|times| {
                let lo = times.partition_point(|&t| t < start);
                let hi = times.partition_point(|&t| t < end);
                times[lo..hi].iter().map(|t| t - start).collect()
            })
            .collect();
        EventSeries { n: self.n, events, t_start: 0.0, t_end: end - start }
    }

    /// All events merged in time order as `(component, timestamp)`.
    pub fn merged(&self) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = self
            .events
            .iter()
            .enumerate()
            .flat_map(|(c, times)| times.iter().map(move |&t| (c, t)))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all
    }
}
