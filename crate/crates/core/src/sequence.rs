//! Event sequences observed on one or more disjoint time windows.
//!
//! A raw SDC sequence carries a single window. A stitched sequence carries one
//! window per constituent segment; the windows are sorted and may touch at
//! their endpoints but never overlap.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Closed time interval `[begin, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub begin: f64,
    pub end: f64,
}

impl ObservationWindow {
    pub fn new(begin: f64, end: f64) -> Result<Self> {
        if !(begin.is_finite() && end.is_finite()) {
            return Err(invalid(format!("window [{begin}, {end}] is not finite")));
        }
        if begin > end {
            return Err(invalid(format!("window begin {begin} exceeds end {end}")));
        }
        Ok(Self { begin, end })
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.end - self.begin
    }

    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        self.begin <= t && t <= self.end
    }

    /// Split into `n` equal consecutive sub-intervals.
    pub fn split(&self, n: usize) -> Vec<ObservationWindow> {
        let step = self.length() / n as f64;
        (0..n)
            .map(|k| {
                let begin = self.begin + step * k as f64;
                let end = if k + 1 == n {
                    self.end
                } else {
                    self.begin + step * (k + 1) as f64
                };
                ObservationWindow { begin, end }
            })
            .collect()
    }
}

/// A single typed event. Types are zero-based indices `0..C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: usize,
}

impl Event {
    pub fn new(time: f64, kind: usize) -> Self {
        Self { time, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    pub id: String,
    events: Vec<Event>,
    windows: Vec<ObservationWindow>,
    pub feature: Option<Vec<f64>>,
    /// Identifier of the SDC sequence this one was derived from, if any.
    pub origin: Option<String>,
}

impl EventSequence {
    /// Build a validated sequence. Events must already be sorted by time.
    pub fn new(
        id: impl Into<String>,
        events: Vec<Event>,
        windows: Vec<ObservationWindow>,
    ) -> Result<Self> {
        let seq = Self {
            id: id.into(),
            events,
            windows,
            feature: None,
            origin: None,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Like [`EventSequence::new`] but stably sorts the events by time first.
    pub fn from_unsorted(
        id: impl Into<String>,
        mut events: Vec<Event>,
        windows: Vec<ObservationWindow>,
    ) -> Result<Self> {
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Self::new(id, events, windows)
    }

    /// Single-window sequence whose window is the span of its own events.
    /// Used when the observation bounds of a record are unknown.
    pub fn from_event_span(id: impl Into<String>, events: Vec<Event>) -> Result<Self> {
        let id = id.into();
        let (first, last) = match (events.first(), events.last()) {
            (Some(f), Some(l)) => (f.time, l.time),
            _ => {
                return Err(Error::InvalidSequence {
                    id,
                    reason: "no window and no events to infer one from".into(),
                })
            }
        };
        let window = ObservationWindow::new(first, last)?;
        Self::new(id, events, vec![window])
    }

    pub fn with_feature(mut self, feature: Option<Vec<f64>>) -> Self {
        self.feature = feature;
        self
    }

    pub fn with_origin(mut self, origin: Option<String>) -> Self {
        self.origin = origin;
        self
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::InvalidSequence {
            id: self.id.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(self.fail("at least one observation window is required"));
        }
        for w in &self.windows {
            if !(w.begin.is_finite() && w.end.is_finite()) || w.begin > w.end {
                return Err(self.fail(format!("malformed window [{}, {}]", w.begin, w.end)));
            }
        }
        for pair in self.windows.windows(2) {
            if pair[0].end > pair[1].begin {
                return Err(self.fail("windows must be sorted and pairwise disjoint"));
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, e) in self.events.iter().enumerate() {
            if !e.time.is_finite() {
                return Err(self.fail(format!("event {i} has a non-finite time")));
            }
            if e.time < prev {
                return Err(self.fail(format!("event {i} is out of time order")));
            }
            prev = e.time;
            if !self.windows.iter().any(|w| w.contains(e.time)) {
                return Err(self.fail(format!(
                    "event {i} at t={} lies outside every window",
                    e.time
                )));
            }
        }
        Ok(())
    }

    /// Check that every event type is below `n_types`.
    pub fn check_types(&self, n_types: usize) -> Result<()> {
        match self.events.iter().find(|e| e.kind >= n_types) {
            Some(e) => Err(Error::IndexOutOfRange {
                what: "event type",
                index: e.kind,
                len: n_types,
            }),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    #[inline]
    pub fn windows(&self) -> &[ObservationWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn begin(&self) -> f64 {
        self.windows[0].begin
    }

    pub fn end(&self) -> f64 {
        self.windows[self.windows.len() - 1].end
    }

    /// Total observed length, summed over the windows (gaps excluded).
    pub fn observed_length(&self) -> f64 {
        self.windows.iter().map(ObservationWindow::length).sum()
    }

    /// Largest event type index plus one, or zero for an empty sequence.
    pub fn type_bound(&self) -> usize {
        self.events.iter().map(|e| e.kind + 1).max().unwrap_or(0)
    }

    /// Keep only events inside `window` and make it the sole window.
    /// An event at a boundary shared by two grid intervals belongs to the
    /// interval it starts, except at the very end of `last_closed` windows.
    pub(crate) fn restrict(&self, window: ObservationWindow, last_closed: bool) -> EventSequence {
        let events = self
            .events
            .iter()
            .copied()
            .filter(|e| {
                e.time >= window.begin
                    && (e.time < window.end || (last_closed && e.time == window.end))
            })
            .collect();
        EventSequence {
            id: self.id.clone(),
            events,
            windows: vec![window],
            feature: self.feature.clone(),
            origin: self.origin.clone(),
        }
    }

    /// Concatenate time-ordered segments into one multi-window sequence.
    pub(crate) fn concat(
        id: String,
        origin: Option<String>,
        feature: Option<Vec<f64>>,
        segments: &[EventSequence],
    ) -> Result<Self> {
        let mut events = Vec::new();
        let mut windows = Vec::new();
        for s in segments {
            events.extend_from_slice(&s.events);
            windows.extend_from_slice(&s.windows);
        }
        let seq = EventSequence {
            id,
            events,
            windows,
            feature,
            origin,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub(crate) fn from_parts_unchecked(
        id: String,
        events: Vec<Event>,
        windows: Vec<ObservationWindow>,
        feature: Option<Vec<f64>>,
        origin: Option<String>,
    ) -> Self {
        EventSequence {
            id,
            events,
            windows,
            feature,
            origin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(a: f64, b: f64) -> ObservationWindow {
        ObservationWindow::new(a, b).unwrap()
    }

    #[test]
    fn window_rejects_reversed_bounds() {
        assert!(ObservationWindow::new(2.0, 1.0).is_err());
        assert!(ObservationWindow::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn split_covers_window_exactly() {
        let parts = w(0.0, 50.0).split(10);
        assert_eq!(parts.len(), 10);
        assert_eq!(parts[0].begin, 0.0);
        assert_eq!(parts[9].end, 50.0);
        for p in &parts {
            assert!((p.length() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unsorted_and_out_of_window_events() {
        let unsorted = vec![Event::new(2.0, 0), Event::new(1.0, 0)];
        assert!(EventSequence::new("a", unsorted.clone(), vec![w(0.0, 5.0)]).is_err());
        assert!(EventSequence::from_unsorted("a", unsorted, vec![w(0.0, 5.0)]).is_ok());

        let outside = vec![Event::new(6.0, 0)];
        assert!(EventSequence::new("b", outside, vec![w(0.0, 5.0)]).is_err());
    }

    #[test]
    fn rejects_overlapping_windows() {
        let r = EventSequence::new("c", vec![], vec![w(0.0, 5.0), w(4.0, 8.0)]);
        assert!(matches!(r, Err(Error::InvalidSequence { .. })));
        // touching windows are fine
        assert!(EventSequence::new("c", vec![], vec![w(0.0, 5.0), w(5.0, 8.0)]).is_ok());
    }

    #[test]
    fn stable_sort_keeps_tie_order() {
        let events = vec![Event::new(1.0, 1), Event::new(0.5, 0), Event::new(1.0, 0)];
        let s = EventSequence::from_unsorted("d", events, vec![w(0.0, 2.0)]).unwrap();
        assert_eq!(s.events()[1].kind, 1);
        assert_eq!(s.events()[2].kind, 0);
    }

    #[test]
    fn event_span_fallback() {
        let s = EventSequence::from_event_span("e", vec![Event::new(1.5, 0), Event::new(3.0, 1)])
            .unwrap();
        assert_eq!(s.windows(), &[w(1.5, 3.0)]);
        assert!(EventSequence::from_event_span("e", vec![]).is_err());
    }

    #[test]
    fn observed_length_skips_gaps() {
        let s = EventSequence::new("f", vec![], vec![w(0.0, 2.0), w(5.0, 6.0)]).unwrap();
        assert_eq!(s.observed_length(), 3.0);
    }
}
