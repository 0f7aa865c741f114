//! Delta-modulation event encoding of sampled waveforms.
//!
//! Per channel, a reference level tracks the signal: each time the signal
//! rises `delta` above the reference an ON event is emitted and the reference
//! steps up, and symmetrically for OFF. The reference therefore stays within
//! `delta` of the signal at every sample, and a constant signal emits nothing.

use super::waveform::{render_channel, samples_to_us, us_to_samples};
use super::{EncoderParams, MultichannelSignal, SynthError};
use crate::event::{Event, EventStream, SpikeTrain};

/// Encodes a multichannel signal into a sorted event stream.
pub fn ncns_encode(
    signal: &MultichannelSignal,
    params: &EncoderParams,
) -> Result<EventStream, SynthError> {
    params.validate()?;
    let mut events = Vec::new();
    for (ch, samples) in signal.channels.iter().enumerate() {
        encode_channel(samples, params.delta, signal.sample_rate_hz, ch as u16, &mut events);
    }
    events.sort_unstable_by_key(Event::sort_key);
    Ok(EventStream::from_parts_unchecked(
        signal.n_channels(),
        signal.duration_us(),
        events,
    ))
}

/// Renders the waveform and encodes it channel by channel without holding the
/// full multichannel signal in memory. Bitwise-identical to
/// `ncns_encode(&synth_waveform(spikes, params, seed)?, params)`.
pub fn synthesize_events(
    spikes: &SpikeTrain,
    params: &EncoderParams,
    seed: u64,
) -> Result<EventStream, SynthError> {
    params.validate()?;
    let n_samples = us_to_samples(spikes.duration_us(), params.sample_rate_hz) as usize;
    let mut events = Vec::new();
    for ch in 0..spikes.n_channels() {
        let samples = render_channel(spikes, params, seed, ch, n_samples)?;
        encode_channel(&samples, params.delta, params.sample_rate_hz, ch, &mut events);
    }
    events.sort_unstable_by_key(Event::sort_key);
    Ok(EventStream::from_parts_unchecked(
        spikes.n_channels(),
        samples_to_us(n_samples as u64, params.sample_rate_hz),
        events,
    ))
}

fn encode_channel(samples: &[f32], delta: f32, rate_hz: u32, channel: u16, out: &mut Vec<Event>) {
    let Some(&first) = samples.first() else {
        return;
    };
    let mut reference = first;
    for (i, &s) in samples.iter().enumerate() {
        let t = samples_to_us(i as u64, rate_hz);
        while s - reference >= delta {
            out.push(Event::new(channel, t, 1));
            reference += delta;
        }
        while reference - s >= delta {
            out.push(Event::new(channel, t, -1));
            reference -= delta;
        }
    }
}
