//! Feature file serialization.
//!
//! Layout (little-endian): magic `"NFTR"`, version `u16` = 1, mode `u8`
//! (0 frame / 1 segmented / 2 binary), `n_channels: u16`, `n_segments: u16`,
//! `t_bin_ms: u32`, `t_s_ms: u32`, `n_samples: u64`; then `n_samples` sample
//! times (`u64`), the row-major `f32` feature matrix, the `f32` `(v_x, v_y)`
//! targets, and the `u32` reach ids.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureError, FeatureFrame, FeatureMode};

pub const FEATURE_MAGIC: &[u8; 4] = b"NFTR";
pub const FEATURE_VERSION: u16 = 1;

fn mode_tag(mode: FeatureMode) -> u8 {
    match mode {
        FeatureMode::Frame => 0,
        FeatureMode::Segmented => 1,
        FeatureMode::Binary => 2,
    }
}

fn tag_mode(tag: u8) -> Option<FeatureMode> {
    match tag {
        0 => Some(FeatureMode::Frame),
        1 => Some(FeatureMode::Segmented),
        2 => Some(FeatureMode::Binary),
        _ => None,
    }
}

pub fn write_features(frame: &FeatureFrame, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let io_err = |source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    };
    frame.validate()?;

    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(FEATURE_MAGIC).map_err(io_err)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&[mode_tag(frame.mode)]).map_err(io_err)?;
    w.write_all(&frame.n_channels.to_le_bytes()).map_err(io_err)?;
    w.write_all(&frame.n_segments.to_le_bytes()).map_err(io_err)?;
    w.write_all(&frame.t_bin_ms.to_le_bytes()).map_err(io_err)?;
    w.write_all(&frame.t_s_ms.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(frame.n_samples() as u64).to_le_bytes()).map_err(io_err)?;
    for &t in &frame.sample_times_us {
        w.write_all(&t.to_le_bytes()).map_err(io_err)?;
    }
    for &v in &frame.x {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    for y in &frame.y {
        w.write_all(&y[0].to_le_bytes()).map_err(io_err)?;
        w.write_all(&y[1].to_le_bytes()).map_err(io_err)?;
    }
    for &r in &frame.reach_ids {
        w.write_all(&r.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureFrame, FeatureError> {
    let path = path.as_ref();
    let p = path.display().to_string();
    let io_err = |source| FeatureError::Io {
        path: p.clone(),
        source,
    };
    let bad = |message: String| FeatureError::MalformedFile {
        path: p.clone(),
        message,
    };

    let mut data = Vec::new();
    File::open(path)
        .map_err(io_err)?
        .read_to_end(&mut data)
        .map_err(io_err)?;

    let mut cur = Cursor { data: &data, pos: 0 };
    let magic = cur.take(4).ok_or_else(|| bad("truncated header".into()))?;
    if magic != FEATURE_MAGIC {
        return Err(bad("bad magic (expected \"NFTR\")".into()));
    }
    let version = cur.u16().ok_or_else(|| bad("truncated header".into()))?;
    if version != FEATURE_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mode = tag_mode(cur.u8().ok_or_else(|| bad("truncated header".into()))?)
        .ok_or_else(|| bad("invalid mode tag".into()))?;
    let n_channels = cur.u16().ok_or_else(|| bad("truncated header".into()))?;
    let n_segments = cur.u16().ok_or_else(|| bad("truncated header".into()))?;
    let t_bin_ms = cur.u32().ok_or_else(|| bad("truncated header".into()))?;
    let t_s_ms = cur.u32().ok_or_else(|| bad("truncated header".into()))?;
    let n_samples = cur.u64().ok_or_else(|| bad("truncated header".into()))? as usize;

    let dim = match mode {
        FeatureMode::Segmented => n_channels as usize * n_segments as usize,
        _ => n_channels as usize,
    };

    let mut sample_times_us = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        sample_times_us.push(cur.u64().ok_or_else(|| bad("truncated sample times".into()))?);
    }
    let mut x = Vec::with_capacity(n_samples * dim);
    for _ in 0..n_samples * dim {
        x.push(cur.f32().ok_or_else(|| bad("truncated feature matrix".into()))?);
    }
    let mut y = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let vx = cur.f32().ok_or_else(|| bad("truncated targets".into()))?;
        let vy = cur.f32().ok_or_else(|| bad("truncated targets".into()))?;
        y.push([vx, vy]);
    }
    let mut reach_ids = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        reach_ids.push(cur.u32().ok_or_else(|| bad("truncated reach ids".into()))?);
    }
    if cur.pos != data.len() {
        return Err(bad(format!("{} trailing bytes", data.len() - cur.pos)));
    }

    let frame = FeatureFrame {
        mode,
        n_channels,
        n_segments,
        t_bin_ms,
        t_s_ms,
        sample_times_us,
        x,
        y,
        reach_ids,
    };
    frame.validate()?;
    Ok(frame)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.data.len() {
            return None;
        }
        let s = &self.data[self.pos..end];
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes(b.try_into().unwrap()))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32(&mut self) -> Option<f32> {
        self.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()))
    }
}
