//! Decoder model files.
//!
//! Layout (little-endian): magic `"NDEC"`, version `u16` = 1, kind `u8`
//! (0 nn / 1 stnn / 2 lstm / 3 snn / 4 linear), `n_dims: u16`, the layer
//! width table (`u32` each, input first), `param_count: u64`,
//! `buffer_count: u64`, raw `f32` parameters in the decoder's canonical
//! order, raw `f32` buffers (batch-norm running statistics), then
//! `json_len: u32` and a JSON blob recording the training configuration.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lstm::LstmDecoder;
use super::mlp::MlpDecoder;
use super::snn::SnnDecoder;
use super::{DecoderError, DecoderKind, DecoderModel, LinearDecoder, Matrix};

pub const MODEL_MAGIC: &[u8; 4] = b"NDEC";
pub const MODEL_VERSION: u16 = 1;

fn kind_tag(kind: DecoderKind) -> u8 {
    match kind {
        DecoderKind::Nn => 0,
        DecoderKind::StNn => 1,
        DecoderKind::Lstm => 2,
        DecoderKind::Snn => 3,
        DecoderKind::Linear => 4,
    }
}

fn tag_kind(tag: u8) -> Option<DecoderKind> {
    match tag {
        0 => Some(DecoderKind::Nn),
        1 => Some(DecoderKind::StNn),
        2 => Some(DecoderKind::Lstm),
        3 => Some(DecoderKind::Snn),
        4 => Some(DecoderKind::Linear),
        _ => None,
    }
}

fn layer_dims(model: &DecoderModel<f32>) -> Vec<u32> {
    let d = model.input_dim() as u32;
    match model {
        DecoderModel::Nn(_) | DecoderModel::StNn(_) => {
            vec![d, super::HIDDEN_1 as u32, super::HIDDEN_2 as u32, 2]
        }
        DecoderModel::Lstm(m) => vec![d, m.hidden as u32, 2],
        DecoderModel::Snn(_) => {
            vec![d, super::SNN_HIDDEN_1 as u32, super::SNN_HIDDEN_2 as u32, 2]
        }
        DecoderModel::Linear(_) => vec![d, 2],
    }
}

pub fn write_model(
    model: &DecoderModel<f32>,
    config_json: &serde_json::Value,
    path: impl AsRef<Path>,
) -> Result<(), DecoderError> {
    let path = path.as_ref();
    let io_err = |source| DecoderError::Io {
        path: path.display().to_string(),
        source,
    };
    let params = model.params();
    let buffers = model.buffers();
    let json = serde_json::to_string(config_json)
        .map_err(|e| DecoderError::Config(format!("config blob: {e}")))?;
    let dims = layer_dims(model);

    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(MODEL_MAGIC).map_err(io_err)?;
    w.write_all(&MODEL_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&[kind_tag(model.kind())]).map_err(io_err)?;
    w.write_all(&(dims.len() as u16).to_le_bytes()).map_err(io_err)?;
    for d in &dims {
        w.write_all(&d.to_le_bytes()).map_err(io_err)?;
    }
    w.write_all(&(params.len() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(buffers.len() as u64).to_le_bytes()).map_err(io_err)?;
    for p in &params {
        w.write_all(&p.to_le_bytes()).map_err(io_err)?;
    }
    for b in &buffers {
        w.write_all(&b.to_le_bytes()).map_err(io_err)?;
    }
    w.write_all(&(json.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(json.as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Builds an untrained model of the right shape; parameters get overwritten
/// by the file contents.
fn skeleton(kind: DecoderKind, dims: &[u32]) -> Result<DecoderModel<f32>, DecoderError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let bad = |msg: &str| DecoderError::Config(format!("model file: {msg}"));
    let input = *dims.first().ok_or_else(|| bad("empty dims table"))? as usize;
    Ok(match kind {
        DecoderKind::Nn => DecoderModel::Nn(MlpDecoder::new(input, 0.5, &mut rng)),
        DecoderKind::StNn => DecoderModel::StNn(MlpDecoder::new(input, 0.5, &mut rng)),
        DecoderKind::Lstm => DecoderModel::Lstm(LstmDecoder::new(input, 0.0, &mut rng)),
        DecoderKind::Snn => DecoderModel::Snn(SnnDecoder::new(input, 0.3, &mut rng)),
        DecoderKind::Linear => DecoderModel::Linear(LinearDecoder {
            w: Matrix::zeros(2, input),
            intercept: [0.0, 0.0],
        }),
    })
}

pub fn read_model(
    path: impl AsRef<Path>,
) -> Result<(DecoderModel<f32>, serde_json::Value), DecoderError> {
    let path = path.as_ref();
    let p = path.display().to_string();
    let io_err = |source| DecoderError::Io {
        path: p.clone(),
        source,
    };
    let bad = |message: String| DecoderError::MalformedModelFile {
        path: p.clone(),
        message,
    };

    let mut data = Vec::new();
    File::open(path)
        .map_err(io_err)?
        .read_to_end(&mut data)
        .map_err(io_err)?;

    let mut pos = 0usize;
    let magic = take(&data, &mut pos, 4).ok_or_else(|| bad("truncated file".into()))?;
    if magic != MODEL_MAGIC {
        return Err(bad("bad magic (expected \"NDEC\")".into()));
    }
    let version = read_u16(&data, &mut pos).ok_or_else(|| bad("truncated file".into()))?;
    if version != MODEL_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let kind_byte = take(&data, &mut pos, 1).ok_or_else(|| bad("truncated file".into()))?[0];
    let kind = tag_kind(kind_byte).ok_or_else(|| bad("invalid kind tag".into()))?;
    let n_dims = read_u16(&data, &mut pos).ok_or_else(|| bad("truncated file".into()))? as usize;
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        dims.push(read_u32(&data, &mut pos).ok_or_else(|| bad("truncated file".into()))?);
    }
    let param_count =
        read_u64(&data, &mut pos).ok_or_else(|| bad("truncated file".into()))? as usize;
    let buffer_count =
        read_u64(&data, &mut pos).ok_or_else(|| bad("truncated file".into()))? as usize;

    let mut model = skeleton(kind, &dims)?;
    if model.param_count() != param_count || model.buffer_count() != buffer_count {
        return Err(bad(format!(
            "parameter table mismatch: file has {param_count}+{buffer_count}, architecture needs {}+{}",
            model.param_count(),
            model.buffer_count()
        )));
    }
    let mut params = Vec::with_capacity(param_count);
    for _ in 0..param_count {
        params.push(read_f32(&data, &mut pos).ok_or_else(|| bad("truncated parameters".into()))?);
    }
    let mut buffers = Vec::with_capacity(buffer_count);
    for _ in 0..buffer_count {
        buffers.push(read_f32(&data, &mut pos).ok_or_else(|| bad("truncated buffers".into()))?);
    }
    model.set_params(&params);
    model.set_buffers(&buffers);

    let json_len =
        read_u32(&data, &mut pos).ok_or_else(|| bad("truncated file".into()))? as usize;
    let json_bytes =
        take(&data, &mut pos, json_len).ok_or_else(|| bad("truncated config blob".into()))?;
    let config: serde_json::Value =
        serde_json::from_slice(json_bytes).map_err(|e| bad(format!("config blob: {e}")))?;
    if pos != data.len() {
        return Err(bad(format!("{} trailing bytes", data.len() - pos)));
    }
    Ok((model, config))
}

fn take<'a>(data: &'a [u8], pos: &mut usize, n: usize) -> Option<&'a [u8]> {
    let end = pos.checked_add(n)?;
    if end > data.len() {
        return None;
    }
    let s = &data[*pos..end];
    *pos = end;
    Some(s)
}

fn read_u16(data: &[u8], pos: &mut usize) -> Option<u16> {
    take(data, pos, 2).map(|b| u16::from_le_bytes(b.try_into().unwrap()))
}

fn read_u32(data: &[u8], pos: &mut usize) -> Option<u32> {
    take(data, pos, 4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
}

fn read_u64(data: &[u8], pos: &mut usize) -> Option<u64> {
    take(data, pos, 8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
}

fn read_f32(data: &[u8], pos: &mut usize) -> Option<f32> {
    take(data, pos, 4).map(|b| f32::from_le_bytes(b.try_into().unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureFrame, FeatureMode};

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("evdec-model-{}-{}", std::process::id(), name));
        p
    }

    #[test]
    fn model_round_trip_preserves_predictions_bitwise() {
        let mut rng = crate::seeds::rng(17, 0);
        let model = DecoderModel::Snn(SnnDecoder::<f32>::new(4, 0.3, &mut rng));
        let path = tmp("snn.ndec");
        let cfg = serde_json::json!({"epochs": 50, "seed": 7});
        write_model(&model, &cfg, &path).unwrap();
        let (back, cfg_back) = read_model(&path).unwrap();
        std::fs::remove_file(&path).ok();

        assert_eq!(back.params(), model.params());
        assert_eq!(cfg_back["seed"], 7);

        let frame = FeatureFrame {
            mode: FeatureMode::Binary,
            n_channels: 4,
            n_segments: 1,
            t_bin_ms: 4,
            t_s_ms: 4,
            sample_times_us: vec![4000, 8000, 12_000],
            x: vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            y: vec![[0.0, 0.0]; 3],
            reach_ids: vec![0, 0, 0],
        };
        let rows = vec![0, 1, 2];
        assert_eq!(
            model.predict(&frame, &rows).unwrap(),
            back.predict(&frame, &rows).unwrap()
        );
    }

    #[test]
    fn mlp_round_trip_keeps_buffers() {
        let mut rng = crate::seeds::rng(18, 0);
        let mut mlp = MlpDecoder::<f32>::new(5, 0.5, &mut rng);
        // make running stats non-trivial
        let x = Matrix::from_fn(8, 5, |r, c| (r * 5 + c) as f32 * 0.1);
        let _ = mlp.forward_train(&x, &mut rng).unwrap();
        let model = DecoderModel::Nn(mlp);

        let path = tmp("nn.ndec");
        write_model(&model, &serde_json::Value::Null, &path).unwrap();
        let (back, _) = read_model(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(back.buffers(), model.buffers());
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let path = tmp("bad.ndec");
        std::fs::write(&path, b"XXXX").unwrap();
        let err = read_model(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(matches!(err, DecoderError::MalformedModelFile { .. }));
    }
}
