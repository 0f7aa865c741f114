//! Multichannel waveform synthesis: white noise plus spike templates.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{EncoderParams, SynthError};
use crate::event::SpikeTrain;
use crate::seeds;

/// A sampled multichannel signal.
#[derive(Clone, Debug, PartialEq)]
pub struct MultichannelSignal {
    pub sample_rate_hz: u32,
    pub channels: Vec<Vec<f32>>,
}

impl MultichannelSignal {
    pub fn n_channels(&self) -> u16 {
        self.channels.len() as u16
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn duration_us(&self) -> u64 {
        samples_to_us(self.n_samples() as u64, self.sample_rate_hz)
    }
}

pub(crate) fn us_to_samples(duration_us: u64, rate_hz: u32) -> u64 {
    ((duration_us as u128 * rate_hz as u128) / 1_000_000) as u64
}

pub(crate) fn samples_to_us(n_samples: u64, rate_hz: u32) -> u64 {
    ((n_samples as u128 * 1_000_000) / rate_hz as u128) as u64
}

/// A 1 ms negative-first biphasic spike waveform with unit peak.
pub fn biphasic_template(sample_rate_hz: u32) -> Vec<f32> {
    let n = (sample_rate_hz / 1000).max(2) as usize;
    (0..n)
        .map(|k| -(std::f32::consts::TAU * k as f32 / n as f32).sin())
        .collect()
}

/// Renders the spike train as a sampled waveform: per channel, white Gaussian
/// noise of `noise_std` plus the amplitude-scaled template at each spike time.
pub fn synth_waveform(
    spikes: &SpikeTrain,
    params: &EncoderParams,
    seed: u64,
) -> Result<MultichannelSignal, SynthError> {
    params.validate()?;
    let n_samples = us_to_samples(spikes.duration_us(), params.sample_rate_hz) as usize;
    let mut channels = Vec::with_capacity(spikes.n_channels() as usize);
    for ch in 0..spikes.n_channels() {
        channels.push(render_channel(spikes, params, seed, ch, n_samples)?);
    }
    Ok(MultichannelSignal {
        sample_rate_hz: params.sample_rate_hz,
        channels,
    })
}

/// One channel of [`synth_waveform`]; RNG is derived from `(seed, channel)`,
/// so rendering channels independently agrees with the full render.
pub(crate) fn render_channel(
    spikes: &SpikeTrain,
    params: &EncoderParams,
    seed: u64,
    channel: u16,
    n_samples: usize,
) -> Result<Vec<f32>, SynthError> {
    let mut rng = seeds::rng(seed, u64::from(channel));
    let mut samples: Vec<f32> = if params.noise_std > 0.0 {
        (0..n_samples)
            .map(|_| {
                let z: f32 = rng.sample(StandardNormal);
                z * params.noise_std
            })
            .collect()
    } else {
        vec![0.0; n_samples]
    };

    for &t in spikes.channel(channel) {
        if t > spikes.duration_us() {
            return Err(SynthError::SpikeBeyondDuration {
                channel,
                time_us: t,
                duration_us: spikes.duration_us(),
            });
        }
        let start = us_to_samples(t, params.sample_rate_hz) as usize;
        for (k, &w) in params.spike_template.iter().enumerate() {
            if let Some(s) = samples.get_mut(start + k) {
                *s += w * params.spike_amplitude;
            }
        }
    }
    Ok(samples)
}
