//! Per-stream event counts and rates.

use serde::Serialize;

use super::EventStream;

#[derive(Clone, Debug, Serialize)]
pub struct StreamStats {
    pub per_channel: Vec<u64>,
    pub total: u64,
    /// Mean event rate in events/s over the stream duration; 0 for an empty
    /// zero-duration stream, +inf for events squeezed into zero duration.
    pub rate_hz: f64,
}

pub fn stream_stats(stream: &EventStream) -> StreamStats {
    let mut per_channel = vec![0u64; stream.n_channels() as usize];
    for ev in stream.events() {
        per_channel[ev.channel as usize] += 1;
    }
    let total = stream.len() as u64;
    let rate_hz = if stream.duration_us() == 0 {
        if total == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        total as f64 / (stream.duration_us() as f64 * 1e-6)
    };
    StreamStats {
        per_channel,
        total,
        rate_hz,
    }
}
