//! Temporal-neighborhood event filter and spike detector.
//!
//! An event on channel `c` at time `t` passes when at least `n_th` earlier
//! events of the same channel (passed or blocked, any polarity) fall in the
//! half-open window `[t - tau, t)`, and — when a refractory period is set —
//! at least `t_ref` has elapsed since the channel's last passed event. Every
//! incoming event enters the channel history whether or not it passes.
//!
//! The spike detector is the same filter with a 1 ms refractory period, so a
//! burst of events from one action potential yields a single detection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::EventStream;

/// EvFilter defaults: pass events with at least 2 same-channel predecessors
/// in the last 500 µs.
pub const DEFAULT_N_TH: u32 = 2;
pub const DEFAULT_TAU_US: u64 = 500;
/// Refractory period that turns the filter into a spike detector.
pub const SPD_T_REF_US: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Required count of past same-channel events in the window.
    pub n_th: u32,
    /// Temporal neighborhood, microseconds. Must be positive.
    pub tau_us: u64,
    /// Refractory period, microseconds. Zero disables refraction.
    pub t_ref_us: u64,
}

impl FilterParams {
    pub fn evfilter(n_th: u32, tau_us: u64) -> Self {
        Self {
            n_th,
            tau_us,
            t_ref_us: 0,
        }
    }

    /// Spike-detector configuration: the same filter plus a 1 ms refractory.
    pub fn spd(n_th: u32, tau_us: u64) -> Self {
        Self {
            n_th,
            tau_us,
            t_ref_us: SPD_T_REF_US,
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.tau_us == 0 {
            return Err(FilterError::ZeroTau);
        }
        Ok(())
    }
}

impl Default for FilterParams {
    fn default() -> Self {
        Self::evfilter(DEFAULT_N_TH, DEFAULT_TAU_US)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("tau_us must be positive")]
    ZeroTau,
    #[error("input stream is not sorted (event index {index})")]
    UnsortedInput { index: usize },
    #[error("compression ratio undefined: raw stream has no events")]
    EmptyRawStream,
}

/// Per-channel filter state: recent event timestamps within the window plus
/// the last passed timestamp.
///
/// The deque holds every timestamp in `[t - tau, t]` for the current event
/// time `t`, in arrival order; older entries are evicted as time advances.
#[derive(Clone, Debug, Default)]
struct ChannelWindow {
    recent: VecDeque<u64>,
    last_pass: Option<u64>,
}

impl ChannelWindow {
    /// Decides pass/block for an event at `t`, then records it.
    fn admit(&mut self, t: u64, params: &FilterParams) -> bool {
        let window_start = t.saturating_sub(params.tau_us);
        while self.recent.front().is_some_and(|&ts| ts < window_start) {
            self.recent.pop_front();
        }
        // Same-timestamp entries sit at the back; they are not "past".
        let concurrent = self.recent.iter().rev().take_while(|&&ts| ts == t).count();
        let in_window = self.recent.len() - concurrent;

        let window_ok = in_window >= params.n_th as usize;
        let refractory_ok = params.t_ref_us == 0
            || self
                .last_pass
                .is_none_or(|lp| t >= lp + params.t_ref_us);

        let pass = window_ok && refractory_ok;
        if pass {
            self.last_pass = Some(t);
        }
        self.recent.push_back(t);
        pass
    }
}

/// Runs the tunable event filter over a sorted stream.
///
/// The output is a subsequence of the input: order and all event fields are
/// preserved.
pub fn filter_events(
    stream: &EventStream,
    params: &FilterParams,
) -> Result<EventStream, FilterError> {
    params.validate()?;
    if let Some(idx) = first_unsorted(stream) {
        return Err(FilterError::UnsortedInput { index: idx });
    }

    let mut windows: Vec<ChannelWindow> = vec![ChannelWindow::default(); stream.n_channels() as usize];
    let mut passed = Vec::new();
    for ev in stream.events() {
        if windows[ev.channel as usize].admit(ev.timestamp_us, params) {
            passed.push(*ev);
        }
    }
    Ok(EventStream::from_parts_unchecked(
        stream.n_channels(),
        stream.duration_us(),
        passed,
    ))
}

/// Spike detection: the event filter with a 1 ms refractory period, so each
/// spike's event burst produces one detection.
pub fn detect_spikes(
    stream: &EventStream,
    n_th: u32,
    tau_us: u64,
) -> Result<EventStream, FilterError> {
    filter_events(stream, &FilterParams::spd(n_th, tau_us))
}

/// Raw-to-filtered event count ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ratio {
    Finite(f64),
    /// Filtered stream was empty; serialized as the string "inf".
    Infinite(InfMarker),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfMarker {
    #[serde(rename = "inf")]
    Inf,
}

impl Ratio {
    pub fn as_f64(&self) -> f64 {
        match self {
            Ratio::Finite(v) => *v,
            Ratio::Infinite(_) => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::Finite(v) => write!(f, "{v}"),
            Ratio::Infinite(_) => write!(f, "inf"),
        }
    }
}

pub fn compression_ratio(raw: &EventStream, filtered: &EventStream) -> Result<Ratio, FilterError> {
    if raw.is_empty() {
        return Err(FilterError::EmptyRawStream);
    }
    if filtered.is_empty() {
        return Ok(Ratio::Infinite(InfMarker::Inf));
    }
    Ok(Ratio::Finite(raw.len() as f64 / filtered.len() as f64))
}

fn first_unsorted(stream: &EventStream) -> Option<usize> {
    stream
        .events()
        .windows(2)
        .position(|w| w[0].sort_key() > w[1].sort_key())
        .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Event;

    fn stream_of(times: &[u64]) -> EventStream {
        let events = times.iter().map(|&t| Event::new(0, t, 1)).collect();
        EventStream::new(1, 1_000_000, events).unwrap()
    }

    fn times(stream: &EventStream) -> Vec<u64> {
        stream.events().iter().map(|e| e.timestamp_us).collect()
    }

    #[test]
    fn empty_stream_stays_empty() {
        let s = EventStream::new(4, 0, vec![]).unwrap();
        let out = filter_events(&s, &FilterParams::evfilter(2, 500)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn identity_configuration_passes_everything() {
        let s = stream_of(&[0, 100, 150, 2000]);
        let out = filter_events(&s, &FilterParams::evfilter(0, 500)).unwrap();
        assert_eq!(out.events(), s.events());
    }

    #[test]
    fn window_test_matches_hand_trace() {
        // t=0 has no history; t=2000's nearest predecessor is 1850 us away.
        let s = stream_of(&[0, 100, 150, 2000]);
        let out = filter_events(&s, &FilterParams::evfilter(1, 500)).unwrap();
        assert_eq!(times(&out), vec![100, 150]);
    }

    #[test]
    fn refractory_blocks_second_pass() {
        let s = stream_of(&[0, 100, 150, 2000]);
        let params = FilterParams {
            n_th: 1,
            tau_us: 500,
            t_ref_us: 1000,
        };
        let out = filter_events(&s, &params).unwrap();
        assert_eq!(times(&out), vec![100]);
    }

    #[test]
    fn burst_yields_single_detection() {
        // 8 events within 300 us
        let s = stream_of(&[1000, 1040, 1080, 1120, 1160, 1200, 1240, 1280]);
        let out = detect_spikes(&s, 2, 500).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.events()[0].timestamp_us, 1080);
    }

    #[test]
    fn separated_bursts_yield_two_detections() {
        let mut ts: Vec<u64> = (0..8).map(|i| 1000 + i * 40).collect();
        ts.extend((0..8).map(|i| 6000 + i * 40));
        let s = stream_of(&ts);
        let out = detect_spikes(&s, 2, 500).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn isolated_events_never_detect() {
        let s = stream_of(&[0, 10_000, 20_000, 30_000]);
        let out = detect_spikes(&s, 1, 500).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn blocked_events_still_count_as_history() {
        // With n_th=2 the third event passes because the two blocked ones
        // are in its window.
        let s = stream_of(&[100, 200, 300]);
        let out = filter_events(&s, &FilterParams::evfilter(2, 500)).unwrap();
        assert_eq!(times(&out), vec![300]);
    }

    #[test]
    fn same_timestamp_events_are_not_their_own_neighbors() {
        let events = vec![
            Event::new(0, 100, -1),
            Event::new(0, 100, 1),
            Event::new(0, 100, 1),
        ];
        let s = EventStream::new(1, 1000, events).unwrap();
        let out = filter_events(&s, &FilterParams::evfilter(1, 500)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn unsorted_input_is_a_domain_error() {
        let s = EventStream::from_parts_unchecked(
            1,
            1000,
            vec![Event::new(0, 500, 1), Event::new(0, 100, 1)],
        );
        let err = filter_events(&s, &FilterParams::default()).unwrap_err();
        assert_eq!(err, FilterError::UnsortedInput { index: 1 });
    }

    #[test]
    fn compression_ratio_cases() {
        let raw = stream_of(&(0..1000).map(|i| i * 10).collect::<Vec<_>>());
        assert_eq!(
            compression_ratio(&raw, &raw).unwrap(),
            Ratio::Finite(1.0)
        );

        let raw192: Vec<u64> = (0..1920).map(|i| i * 10).collect();
        let filt: Vec<u64> = (0..10).map(|i| i * 10).collect();
        assert_eq!(
            compression_ratio(&stream_of(&raw192), &stream_of(&filt)).unwrap(),
            Ratio::Finite(192.0)
        );

        let empty = EventStream::new(1, 1_000_000, vec![]).unwrap();
        assert_eq!(
            compression_ratio(&raw, &empty).unwrap(),
            Ratio::Infinite(InfMarker::Inf)
        );
        assert_eq!(
            compression_ratio(&empty, &empty).unwrap_err(),
            FilterError::EmptyRawStream
        );
    }

    #[test]
    fn ratio_serializes_infinity_marker() {
        assert_eq!(
            serde_json::to_string(&Ratio::Finite(2.5)).unwrap(),
            "2.5"
        );
        assert_eq!(
            serde_json::to_string(&Ratio::Infinite(InfMarker::Inf)).unwrap(),
            "\"inf\""
        );
    }
}
