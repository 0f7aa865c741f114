//! Desk-scale synthetic stand-ins for motor-cortex recordings: center-out
//! reach trajectories, cosine-tuned Poisson spike trains, a multichannel
//! spike-plus-noise waveform, and delta-modulation event encoding of it.

mod encoder;
mod reaches;
mod spikes;
mod trajectory_io;
mod waveform;

pub use encoder::{ncns_encode, synthesize_events};
pub use reaches::gen_reaches;
pub use spikes::gen_spikes;
pub use trajectory_io::{read_trajectory_csv, write_trajectory_csv};
pub use waveform::{biphasic_template, synth_waveform, MultichannelSignal};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("channel {channel}: spike at {time_us} us is beyond signal duration {duration_us} us")]
    SpikeBeyondDuration {
        channel: u16,
        time_us: u64,
        duration_us: u64,
    },
    #[error("{path}: line {line}: {message}")]
    MalformedCsv {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A sampled 2-D reach trajectory with piecewise-constant targets.
///
/// `velocities[i]` is the forward difference `(positions[i+1] -
/// positions[i]) / T_s` (zero at the last sample), so positions and
/// velocities stay consistent for label alignment. `reach_boundaries[r]` is
/// the sample index where reach `r` begins, i.e. where the target changes.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachTrajectory {
    pub sample_period_us: u64,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub target_positions: Vec<[f64; 2]>,
    pub reach_boundaries: Vec<usize>,
}

impl ReachTrajectory {
    pub fn n_samples(&self) -> usize {
        self.positions.len()
    }

    pub fn n_reaches(&self) -> usize {
        self.reach_boundaries.len()
    }

    pub fn duration_us(&self) -> u64 {
        self.n_samples() as u64 * self.sample_period_us
    }

    /// Reach index of each sample, derived from the boundaries.
    pub fn reach_ids(&self) -> Vec<u32> {
        let mut ids = vec![0u32; self.n_samples()];
        let mut reach = 0usize;
        for (i, id) in ids.iter_mut().enumerate() {
            while reach + 1 < self.reach_boundaries.len()
                && i >= self.reach_boundaries[reach + 1]
            {
                reach += 1;
            }
            *id = reach as u32;
        }
        ids
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let n = self.positions.len();
        if self.velocities.len() != n || self.target_positions.len() != n {
            return Err(SynthError::BadParams(
                "positions, velocities, and targets must have equal length".into(),
            ));
        }
        if self.sample_period_us == 0 {
            return Err(SynthError::BadParams("sample_period_us must be positive".into()));
        }
        let finite =
            |v: &[[f64; 2]]| v.iter().all(|p| p[0].is_finite() && p[1].is_finite());
        if !finite(&self.positions) || !finite(&self.velocities) {
            return Err(SynthError::BadParams("non-finite trajectory values".into()));
        }
        if !self.reach_boundaries.windows(2).all(|w| w[0] < w[1]) {
            return Err(SynthError::BadParams(
                "reach boundaries must be strictly increasing".into(),
            ));
        }
        for &b in &self.reach_boundaries {
            if b >= n {
                return Err(SynthError::BadParams(format!(
                    "reach boundary {b} out of range ({n} samples)"
                )));
            }
            let changed = b == 0 || self.target_positions[b] != self.target_positions[b - 1];
            if !changed {
                return Err(SynthError::BadParams(format!(
                    "reach boundary {b} is not a target-change sample"
                )));
            }
        }
        Ok(())
    }
}

/// Per-channel cosine tuning of firing rate to movement direction and speed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelTuning {
    /// Preferred movement direction, radians.
    pub preferred_direction: f64,
    /// Baseline firing rate, Hz.
    pub baseline_hz: f64,
    /// Rate gain, Hz per unit speed.
    pub modulation_depth: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TuningModel {
    pub channels: Vec<ChannelTuning>,
}

impl TuningModel {
    pub fn n_channels(&self) -> u16 {
        self.channels.len() as u16
    }

    /// Draws per-channel tuning: preferred directions uniform on the circle,
    /// baselines and depths uniform in the given ranges.
    pub fn random(
        n_channels: u16,
        baseline_hz: (f64, f64),
        modulation_depth: (f64, f64),
        seed: u64,
    ) -> Self {
        use rand::Rng;
        let mut rng = crate::seeds::rng(seed, u64::from(u32::MAX)); // tuning stream
        let channels = (0..n_channels)
            .map(|_| ChannelTuning {
                preferred_direction: rng.gen_range(0.0..std::f64::consts::TAU),
                baseline_hz: rng.gen_range(baseline_hz.0..=baseline_hz.1),
                modulation_depth: rng.gen_range(modulation_depth.0..=modulation_depth.1),
            })
            .collect();
        Self { channels }
    }
}

/// Behavioral parameters of the delta-modulation event encoder and the
/// waveform it runs on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncoderParams {
    /// Delta-modulation threshold, signal units. Must be positive.
    pub delta: f32,
    /// Peak amplitude applied to the unit spike template.
    pub spike_amplitude: f32,
    /// Spike waveform added at each spike time (unit peak, ~1 ms).
    pub spike_template: Vec<f32>,
    /// White-noise standard deviation, signal units.
    pub noise_std: f32,
    pub sample_rate_hz: u32,
}

impl EncoderParams {
    /// Defaults matching the stock synthetic configuration: 24 kHz sampling,
    /// a 1 ms biphasic template, and an SNR that makes background events
    /// dominate raw streams while spikes stay detectable.
    pub fn default_at(sample_rate_hz: u32) -> Self {
        Self {
            delta: 1.0,
            spike_amplitude: 1.3,
            spike_template: biphasic_template(sample_rate_hz),
            noise_std: 0.42,
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.delta > 0.0) {
            return Err(SynthError::BadParams("delta must be positive".into()));
        }
        if self.sample_rate_hz == 0 {
            return Err(SynthError::BadParams("sample_rate_hz must be positive".into()));
        }
        if self.noise_std < 0.0 {
            return Err(SynthError::BadParams("noise_std must be non-negative".into()));
        }
        if self.spike_template.is_empty() {
            return Err(SynthError::BadParams("spike_template must be non-empty".into()));
        }
        Ok(())
    }
}

impl Default for EncoderParams {
    fn default() -> Self {
        Self::default_at(24_000)
    }
}
