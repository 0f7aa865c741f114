//! Address-event data types shared by the whole pipeline.
//!
//! An [`Event`] is a `(channel, timestamp, polarity)` record; an
//! [`EventStream`] is a time-sorted sequence of them with stream metadata.
//! [`SpikeTrain`] carries ground-truth spike times for the GT baseline.

mod io;
mod stats;

pub use io::{read_events, write_events, Format, ReadOutcome, BINARY_MAGIC, BINARY_VERSION};
pub use stats::{stream_stats, StreamStats};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single address event: which channel fired, when, and in which direction.
///
/// Timestamps are integer microseconds from recording start. Polarity is
/// exactly `+1` (ON) or `-1` (OFF).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub channel: u16,
    pub timestamp_us: u64,
    pub polarity: i8,
}

impl Event {
    pub fn new(channel: u16, timestamp_us: u64, polarity: i8) -> Self {
        Self {
            channel,
            timestamp_us,
            polarity,
        }
    }

    /// Total order used everywhere: timestamp, then channel, then polarity.
    pub fn sort_key(&self) -> (u64, u16, i8) {
        (self.timestamp_us, self.channel, self.polarity)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("n_channels must be positive")]
    ZeroChannels,
    #[error("event {index}: channel {channel} out of range (n_channels = {n_channels})")]
    ChannelOutOfRange {
        index: usize,
        channel: u16,
        n_channels: u16,
    },
    #[error("event {index}: polarity {polarity} is not +1 or -1")]
    BadPolarity { index: usize, polarity: i8 },
    #[error("event {index}: timestamp {timestamp_us} exceeds stream duration {duration_us}")]
    TimestampPastDuration {
        index: usize,
        timestamp_us: u64,
        duration_us: u64,
    },
    #[error("events not sorted at index {index}")]
    Unsorted { index: usize },
    #[error("channel {channel}: spike times not strictly increasing at index {index}")]
    NonIncreasingSpikes { channel: u16, index: usize },
}

/// A sorted multichannel event stream.
///
/// Invariants (enforced by [`EventStream::new`]): events sorted by
/// `(timestamp, channel, polarity)`, every channel `< n_channels`, every
/// polarity `±1`, every timestamp `<= duration_us`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    n_channels: u16,
    duration_us: u64,
    events: Vec<Event>,
}

impl EventStream {
    /// Builds a stream, validating every invariant.
    pub fn new(n_channels: u16, duration_us: u64, events: Vec<Event>) -> Result<Self, EventError> {
        let stream = Self::from_parts_unchecked(n_channels, duration_us, events);
        stream.validate()?;
        Ok(stream)
    }

    /// Builds a stream from possibly unsorted events, sorting if needed.
    ///
    /// Returns the stream and whether a re-sort was necessary.
    pub fn sorted(
        n_channels: u16,
        duration_us: u64,
        mut events: Vec<Event>,
    ) -> Result<(Self, bool), EventError> {
        let resorted = !events.windows(2).all(|w| w[0].sort_key() <= w[1].sort_key());
        if resorted {
            events.sort_by_key(Event::sort_key);
        }
        Ok((Self::new(n_channels, duration_us, events)?, resorted))
    }

    /// Builds a stream without validation. Callers promise the invariants
    /// hold, or validate afterwards.
    pub fn from_parts_unchecked(n_channels: u16, duration_us: u64, events: Vec<Event>) -> Self {
        Self {
            n_channels,
            duration_us,
            events,
        }
    }

    pub fn validate(&self) -> Result<(), EventError> {
        if self.n_channels == 0 {
            return Err(EventError::ZeroChannels);
        }
        for (index, ev) in self.events.iter().enumerate() {
            if ev.channel >= self.n_channels {
                return Err(EventError::ChannelOutOfRange {
                    index,
                    channel: ev.channel,
                    n_channels: self.n_channels,
                });
            }
            if ev.polarity != 1 && ev.polarity != -1 {
                return Err(EventError::BadPolarity {
                    index,
                    polarity: ev.polarity,
                });
            }
            if ev.timestamp_us > self.duration_us {
                return Err(EventError::TimestampPastDuration {
                    index,
                    timestamp_us: ev.timestamp_us,
                    duration_us: self.duration_us,
                });
            }
            if index > 0 && self.events[index - 1].sort_key() > ev.sort_key() {
                return Err(EventError::Unsorted { index });
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> u16 {
        self.n_channels
    }

    pub fn duration_us(&self) -> u64 {
        self.duration_us
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// True if events are in the canonical sorted order.
    pub fn is_sorted(&self) -> bool {
        self.events
            .windows(2)
            .all(|w| w[0].sort_key() <= w[1].sort_key())
    }
}

/// Ground-truth spike times, one strictly increasing list per channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeTrain {
    n_channels: u16,
    duration_us: u64,
    spike_times_us: Vec<Vec<u64>>,
}

impl SpikeTrain {
    pub fn new(
        n_channels: u16,
        duration_us: u64,
        spike_times_us: Vec<Vec<u64>>,
    ) -> Result<Self, EventError> {
        if n_channels == 0 {
            return Err(EventError::ZeroChannels);
        }
        assert_eq!(
            spike_times_us.len(),
            n_channels as usize,
            "one spike-time list per channel"
        );
        for (ch, times) in spike_times_us.iter().enumerate() {
            for (i, w) in times.windows(2).enumerate() {
                if w[1] <= w[0] {
                    return Err(EventError::NonIncreasingSpikes {
                        channel: ch as u16,
                        index: i + 1,
                    });
                }
            }
        }
        Ok(Self {
            n_channels,
            duration_us,
            spike_times_us,
        })
    }

    pub fn n_channels(&self) -> u16 {
        self.n_channels
    }

    pub fn duration_us(&self) -> u64 {
        self.duration_us
    }

    pub fn channel(&self, ch: u16) -> &[u64] {
        &self.spike_times_us[ch as usize]
    }

    pub fn channels(&self) -> &[Vec<u64>] {
        &self.spike_times_us
    }

    pub fn total_spikes(&self) -> usize {
        self.spike_times_us.iter().map(Vec::len).sum()
    }
}

/// Compare two events by the canonical order; useful for merges.
pub fn event_order(a: &Event, b: &Event) -> Ordering {
    a.sort_key().cmp(&b.sort_key())
}
