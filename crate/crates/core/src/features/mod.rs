//! Feature extraction: converts event streams into per-sample decoder inputs
//! aligned with kinematic targets.
//!
//! Three schemes share one sliding sample grid (multiples of the stride
//! `T_s`, starting once a full `T_bin` window is available):
//!
//! - frame: per-channel event counts in the window `(t - T_bin, t]`
//! - segmented: the window split into `b` consecutive sub-bins, counts
//!   flattened channel-major
//! - binary: 1 if the channel fired in the last step `(t - T_s, t]`, else 0

mod io;
mod split;

pub use io::{read_features, write_features, FEATURE_MAGIC, FEATURE_VERSION};
pub use split::{segment_and_split, split_reach_count, DatasetSplit, Partition};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Event, EventStream, SpikeTrain};
use crate::synth::ReachTrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Frame,
    Segmented,
    Binary,
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature config: {0}")]
    Config(String),
    #[error("stream has {stream_channels} channels but features expect {expected}")]
    ChannelMismatch {
        stream_channels: u16,
        expected: u16,
    },
    #[error("trajectory too short: no sample grid fits a full window")]
    EmptyGrid,
    #[error("dataset needs at least 4 reaches, got {0}")]
    TooFewReaches(usize),
    #[error("{path}: {message}")]
    MalformedFile { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub mode: FeatureMode,
    /// Window width T_bin, milliseconds.
    pub t_bin_ms: u32,
    /// Stride T_s, milliseconds (the kinematic sample period).
    pub t_s_ms: u32,
    /// Sub-bin count b for segmented mode; 1 otherwise.
    pub n_segments: u16,
}

impl FeatureConfig {
    pub fn frame(t_bin_ms: u32, t_s_ms: u32) -> Self {
        Self {
            mode: FeatureMode::Frame,
            t_bin_ms,
            t_s_ms,
            n_segments: 1,
        }
    }

    pub fn segmented(t_bin_ms: u32, t_s_ms: u32, n_segments: u16) -> Self {
        Self {
            mode: FeatureMode::Segmented,
            t_bin_ms,
            t_s_ms,
            n_segments,
        }
    }

    /// Binary mode steps by T_s with window width equal to the step.
    pub fn binary(t_s_ms: u32) -> Self {
        Self {
            mode: FeatureMode::Binary,
            t_bin_ms: t_s_ms,
            t_s_ms,
            n_segments: 1,
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.t_bin_ms == 0 || self.t_s_ms == 0 {
            return Err(FeatureError::Config(
                "t_bin_ms and t_s_ms must be positive".into(),
            ));
        }
        if self.n_segments == 0 {
            return Err(FeatureError::Config("n_segments must be at least 1".into()));
        }
        match self.mode {
            FeatureMode::Frame => {
                if self.t_bin_ms < self.t_s_ms {
                    return Err(FeatureError::Config(format!(
                        "frame mode needs t_bin >= t_s ({} < {})",
                        self.t_bin_ms, self.t_s_ms
                    )));
                }
            }
            FeatureMode::Segmented => {
                if self.t_bin_ms % u32::from(self.n_segments) != 0 {
                    return Err(FeatureError::Config(format!(
                        "t_bin ({} ms) must be divisible by n_segments ({})",
                        self.t_bin_ms, self.n_segments
                    )));
                }
                if self.t_bin_ms < self.t_s_ms {
                    return Err(FeatureError::Config(format!(
                        "segmented mode needs t_bin >= t_s ({} < {})",
                        self.t_bin_ms, self.t_s_ms
                    )));
                }
            }
            FeatureMode::Binary => {
                if self.t_bin_ms != self.t_s_ms {
                    return Err(FeatureError::Config(
                        "binary mode steps by t_s; t_bin must equal t_s".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Feature vector width for `n_channels` recording channels.
    pub fn dim(&self, n_channels: u16) -> usize {
        match self.mode {
            FeatureMode::Segmented => n_channels as usize * self.n_segments as usize,
            _ => n_channels as usize,
        }
    }
}

/// Per-sample feature vectors with aligned kinematic targets.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFrame {
    pub mode: FeatureMode,
    pub n_channels: u16,
    pub n_segments: u16,
    pub t_bin_ms: u32,
    pub t_s_ms: u32,
    pub sample_times_us: Vec<u64>,
    /// Row-major `[n_samples x dim]` feature matrix.
    pub x: Vec<f32>,
    /// Per-sample `(v_x, v_y)` targets.
    pub y: Vec<[f32; 2]>,
    pub reach_ids: Vec<u32>,
}

impl FeatureFrame {
    pub fn dim(&self) -> usize {
        match self.mode {
            FeatureMode::Segmented => self.n_channels as usize * self.n_segments as usize,
            _ => self.n_channels as usize,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.sample_times_us.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.x[i * d..(i + 1) * d]
    }

    /// Indices of rows whose reach id is in `reaches`.
    pub fn rows_in(&self, reaches: &[u32]) -> Vec<usize> {
        let set: std::collections::BTreeSet<u32> = reaches.iter().copied().collect();
        (0..self.n_samples())
            .filter(|&i| set.contains(&self.reach_ids[i]))
            .collect()
    }

    /// New frame containing only the given rows (in the given order).
    pub fn subset(&self, rows: &[usize]) -> FeatureFrame {
        let d = self.dim();
        let mut x = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            x.extend_from_slice(self.row(r));
        }
        FeatureFrame {
            mode: self.mode,
            n_channels: self.n_channels,
            n_segments: self.n_segments,
            t_bin_ms: self.t_bin_ms,
            t_s_ms: self.t_s_ms,
            sample_times_us: rows.iter().map(|&r| self.sample_times_us[r]).collect(),
            x,
            y: rows.iter().map(|&r| self.y[r]).collect(),
            reach_ids: rows.iter().map(|&r| self.reach_ids[r]).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let n = self.n_samples();
        if self.y.len() != n || self.reach_ids.len() != n || self.x.len() != n * self.dim() {
            return Err(FeatureError::Config(
                "feature matrix, targets, and reach ids must have equal length".into(),
            ));
        }
        if self.mode == FeatureMode::Binary && !self.x.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(FeatureError::Config("binary features must be 0 or 1".into()));
        }
        Ok(())
    }
}

/// Frame-mode features: x_i(t) = count of channel-i events in `(t - T_bin, t]`.
pub fn bin_counts(
    stream: &EventStream,
    traj: &ReachTrajectory,
    cfg: &FeatureConfig,
) -> Result<FeatureFrame, FeatureError> {
    expect_mode(cfg, FeatureMode::Frame)?;
    featurize(stream, traj, cfg)
}

/// Segmented features: the window split into `b` sub-bins (oldest first),
/// flattened channel-major so channel `i` sub-bin `k` (1-based) lands at
/// index `i*b + k - 1`.
pub fn segmented_bin_counts(
    stream: &EventStream,
    traj: &ReachTrajectory,
    cfg: &FeatureConfig,
) -> Result<FeatureFrame, FeatureError> {
    expect_mode(cfg, FeatureMode::Segmented)?;
    featurize(stream, traj, cfg)
}

/// Binary features: 1 where the channel fired at least once in the step.
pub fn binarize_stream(
    stream: &EventStream,
    traj: &ReachTrajectory,
    cfg: &FeatureConfig,
) -> Result<FeatureFrame, FeatureError> {
    expect_mode(cfg, FeatureMode::Binary)?;
    featurize(stream, traj, cfg)
}

fn expect_mode(cfg: &FeatureConfig, mode: FeatureMode) -> Result<(), FeatureError> {
    if cfg.mode != mode {
        return Err(FeatureError::Config(format!(
            "expected {:?} mode config, got {:?}",
            mode, cfg.mode
        )));
    }
    Ok(())
}

/// Featurizes a stream according to `cfg.mode`, aligning each sample with the
/// trajectory's velocity target and reach id.
///
/// The sample grid is `t = k * T_s` for `k >= ceil(T_bin / T_s)` (warm-up
/// samples with partial windows are dropped) up to the end of the trajectory
/// and stream.
pub fn featurize(
    stream: &EventStream,
    traj: &ReachTrajectory,
    cfg: &FeatureConfig,
) -> Result<FeatureFrame, FeatureError> {
    cfg.validate()?;
    let t_bin_us = u64::from(cfg.t_bin_ms) * 1000;
    let t_s_us = u64::from(cfg.t_s_ms) * 1000;

    let k_start = t_bin_us.div_ceil(t_s_us);
    let k_end_stream = stream.duration_us() / t_s_us;
    let k_end_traj = traj.n_samples().saturating_sub(1) as u64;
    let k_end = k_end_stream.min(k_end_traj);
    if k_end < k_start {
        return Err(FeatureError::EmptyGrid);
    }
    let n_samples = (k_end - k_start + 1) as usize;

    let n_channels = stream.n_channels();
    let dim = cfg.dim(n_channels);
    let b = match cfg.mode {
        FeatureMode::Segmented => cfg.n_segments as usize,
        _ => 1,
    };
    let sub_us = t_bin_us / b as u64;

    // per-channel sorted timestamps
    let mut per_channel: Vec<Vec<u64>> = vec![Vec::new(); n_channels as usize];
    for ev in stream.events() {
        per_channel[ev.channel as usize].push(ev.timestamp_us);
    }

    let mut x = vec![0.0f32; n_samples * dim];
    for (ch, times) in per_channel.iter().enumerate() {
        // two pointers over the sliding window
        let mut lo = 0usize; // first index with ts > t - T_bin
        let mut hi = 0usize; // first index with ts > t
        for k in k_start..=k_end {
            let t = k * t_s_us;
            let w_start = t - t_bin_us; // exclusive
            while lo < times.len() && times[lo] <= w_start {
                lo += 1;
            }
            while hi < times.len() && times[hi] <= t {
                hi += 1;
            }
            let row = (k - k_start) as usize;
            match cfg.mode {
                FeatureMode::Frame => {
                    x[row * dim + ch] = (hi - lo) as f32;
                }
                FeatureMode::Binary => {
                    x[row * dim + ch] = if hi > lo { 1.0 } else { 0.0 };
                }
                FeatureMode::Segmented => {
                    for &ts in &times[lo..hi] {
                        // sub-bin 1 is the oldest slice of the window
                        let offset = ts - w_start - 1; // ts in (w_start, t]
                        let seg = (offset / sub_us) as usize;
                        x[row * dim + ch * b + seg.min(b - 1)] += 1.0;
                    }
                }
            }
        }
    }

    let reach_ids_all = traj.reach_ids();
    let mut sample_times_us = Vec::with_capacity(n_samples);
    let mut y = Vec::with_capacity(n_samples);
    let mut reach_ids = Vec::with_capacity(n_samples);
    for k in k_start..=k_end {
        let idx = k as usize;
        sample_times_us.push(k * t_s_us);
        y.push([traj.velocities[idx][0] as f32, traj.velocities[idx][1] as f32]);
        reach_ids.push(reach_ids_all[idx]);
    }

    let frame = FeatureFrame {
        mode: cfg.mode,
        n_channels,
        n_segments: cfg.n_segments,
        t_bin_ms: cfg.t_bin_ms,
        t_s_ms: cfg.t_s_ms,
        sample_times_us,
        x,
        y,
        reach_ids,
    };
    frame.validate()?;
    Ok(frame)
}

/// Converts ground-truth spike times into an ON-polarity event stream so the
/// GT baseline runs through the identical featurization path.
pub fn spike_train_to_stream(train: &SpikeTrain) -> EventStream {
    let mut events = Vec::with_capacity(train.total_spikes());
    for (ch, times) in train.channels().iter().enumerate() {
        for &t in times {
            events.push(Event::new(ch as u16, t, 1));
        }
    }
    events.sort_unstable_by_key(Event::sort_key);
    EventStream::from_parts_unchecked(train.n_channels(), train.duration_us(), events)
}
