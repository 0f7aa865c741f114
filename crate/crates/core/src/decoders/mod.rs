//! Trainable decoders: frame MLP (NN), segmented-bin MLP (ST-NN), LSTM, and
//! spiking (SNN), plus a closed-form ridge baseline. All gradients are
//! hand-derived; the spiking network trains with surrogate-gradient BPTT.
//!
//! Math is generic over [`Real`] so production paths run in f32 while
//! gradient checks run a 64-bit shadow of the same code.

mod batchnorm;
mod dense;
mod lif;
mod linear;
mod lstm;
mod matrix;
mod mlp;
mod model_io;
mod real;
mod snn;
mod surrogate;
mod train;

pub use batchnorm::{BatchNormLayer, BN_EPSILON, BN_MOMENTUM};
pub use dense::DenseLayer;
pub use lif::{lif_step, LifLayer, LifState, LifStepRecord, ResetMode, SpikeMode};
pub use linear::{linear_fit, LinearDecoder};
pub use lstm::{LstmDecoder, LstmState, LSTM_HIDDEN};
pub use matrix::Matrix;
pub use mlp::{MlpDecoder, HIDDEN_1, HIDDEN_2};
pub use model_io::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use real::Real;
pub use snn::{SnnDecoder, SnnState, SnnThetas, SNN_HIDDEN_1, SNN_HIDDEN_2};
pub use surrogate::{surrogate_grad, surrogate_spike, DEFAULT_ALPHA};
pub use train::{train, AdamW, EpochStats, Trained, TrainConfig, TrainingLog};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureFrame, FeatureMode};

#[derive(Debug, Error)]
pub enum DecoderError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature mode {mode:?} is incompatible with decoder kind {kind:?}")]
    ModeMismatch { kind: DecoderKind, mode: FeatureMode },
    #[error("spiking decoder inputs must be binary")]
    NonBinaryInput,
    #[error("empty data partition: {0}")]
    EmptyPartition(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {message}")]
    MalformedModelFile { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Nn,
    StNn,
    Lstm,
    Snn,
    Linear,
}

impl DecoderKind {
    /// Which feature mode this decoder consumes.
    pub fn accepts(self, mode: FeatureMode) -> bool {
        match self {
            DecoderKind::Nn | DecoderKind::Lstm => mode == FeatureMode::Frame,
            DecoderKind::StNn => mode == FeatureMode::Segmented,
            DecoderKind::Snn => mode == FeatureMode::Binary,
            DecoderKind::Linear => {
                mode == FeatureMode::Frame || mode == FeatureMode::Segmented
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Nn => "nn",
            DecoderKind::StNn => "stnn",
            DecoderKind::Lstm => "lstm",
            DecoderKind::Snn => "snn",
            DecoderKind::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nn" => Some(DecoderKind::Nn),
            "stnn" | "st-nn" => Some(DecoderKind::StNn),
            "lstm" => Some(DecoderKind::Lstm),
            "snn" => Some(DecoderKind::Snn),
            "linear" => Some(DecoderKind::Linear),
            _ => None,
        }
    }
}

impl std::fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A trained (or initialized) decoder of any kind.
#[derive(Clone, Debug, PartialEq)]
pub enum DecoderModel<S> {
    Nn(MlpDecoder<S>),
    StNn(MlpDecoder<S>),
    Lstm(LstmDecoder<S>),
    Snn(SnnDecoder<S>),
    Linear(LinearDecoder<S>),
}

/// Mutable evaluation state; stateless decoders carry none.
#[derive(Clone, Debug)]
pub enum DecoderState<S> {
    Stateless,
    Lstm(LstmState<S>),
    Snn(SnnState<S>),
}

impl<S: Real> DecoderModel<S> {
    pub fn kind(&self) -> DecoderKind {
        match self {
            DecoderModel::Nn(_) => DecoderKind::Nn,
            DecoderModel::StNn(_) => DecoderKind::StNn,
            DecoderModel::Lstm(_) => DecoderKind::Lstm,
            DecoderModel::Snn(_) => DecoderKind::Snn,
            DecoderModel::Linear(_) => DecoderKind::Linear,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            DecoderModel::Nn(m) | DecoderModel::StNn(m) => m.input_dim(),
            DecoderModel::Lstm(m) => m.input_dim(),
            DecoderModel::Snn(m) => m.input_dim(),
            DecoderModel::Linear(m) => m.input_dim(),
        }
    }

    pub fn check_features(&self, frame: &FeatureFrame) -> Result<(), DecoderError> {
        if !self.kind().accepts(frame.mode) {
            return Err(DecoderError::ModeMismatch {
                kind: self.kind(),
                mode: frame.mode,
            });
        }
        if frame.dim() != self.input_dim() {
            return Err(DecoderError::DimensionMismatch {
                expected: self.input_dim(),
                got: frame.dim(),
            });
        }
        Ok(())
    }

    pub fn initial_state(&self) -> DecoderState<S> {
        match self {
            DecoderModel::Lstm(m) => DecoderState::Lstm(LstmState::zeros(m.hidden)),
            DecoderModel::Snn(m) => DecoderState::Snn(m.reset_state()),
            _ => DecoderState::Stateless,
        }
    }

    /// Predicts the given rows in order, carrying `state` across the call so
    /// chunked evaluation matches one-shot evaluation exactly.
    pub fn predict_with_state(
        &self,
        frame: &FeatureFrame,
        rows: &[usize],
        state: &mut DecoderState<S>,
    ) -> Result<Vec<[S; 2]>, DecoderError> {
        self.check_features(frame)?;
        match (self, state) {
            (DecoderModel::Nn(m), DecoderState::Stateless)
            | (DecoderModel::StNn(m), DecoderState::Stateless) => {
                let x = rows_to_matrix(frame, rows);
                let y = m.forward_eval(&x)?;
                Ok((0..rows.len()).map(|r| [y.get(r, 0), y.get(r, 1)]).collect())
            }
            (DecoderModel::Linear(m), DecoderState::Stateless) => rows
                .iter()
                .map(|&r| m.predict_vec(&row_to_vec(frame, r)))
                .collect(),
            (DecoderModel::Lstm(m), DecoderState::Lstm(st)) => rows
                .iter()
                .map(|&r| m.step_eval(st, &row_to_vec(frame, r)))
                .collect(),
            (DecoderModel::Snn(m), DecoderState::Snn(st)) => rows
                .iter()
                .map(|&r| m.step_eval(st, &row_to_vec(frame, r)))
                .collect(),
            _ => Err(DecoderError::Config(
                "decoder state does not match decoder kind".into(),
            )),
        }
    }

    /// Chronological evaluation with a single initial state reset.
    pub fn predict(
        &self,
        frame: &FeatureFrame,
        rows: &[usize],
    ) -> Result<Vec<[S; 2]>, DecoderError> {
        let mut state = self.initial_state();
        self.predict_with_state(frame, rows, &mut state)
    }

    /// Trainable parameters in each decoder's canonical order.
    pub fn params(&self) -> Vec<S> {
        match self {
            DecoderModel::Nn(m) | DecoderModel::StNn(m) => m.params(),
            DecoderModel::Lstm(m) => m.params(),
            DecoderModel::Snn(m) => m.params(),
            DecoderModel::Linear(m) => m.params(),
        }
    }

    pub fn set_params(&mut self, params: &[S]) {
        match self {
            DecoderModel::Nn(m) | DecoderModel::StNn(m) => m.set_params(params),
            DecoderModel::Lstm(m) => m.set_params(params),
            DecoderModel::Snn(m) => m.set_params(params),
            DecoderModel::Linear(m) => m.set_params(params),
        }
    }

    /// Non-trainable state (batch-norm running statistics).
    pub fn buffers(&self) -> Vec<S> {
        match self {
            DecoderModel::Nn(m) | DecoderModel::StNn(m) => m.buffers(),
            _ => Vec::new(),
        }
    }

    pub fn set_buffers(&mut self, buffers: &[S]) {
        match self {
            DecoderModel::Nn(m) | DecoderModel::StNn(m) => m.set_buffers(buffers),
            _ => assert!(buffers.is_empty(), "this decoder kind has no buffers"),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            DecoderModel::Nn(m) | DecoderModel::StNn(m) => m.param_count(),
            DecoderModel::Lstm(m) => m.param_count(),
            DecoderModel::Snn(m) => m.param_count(),
            DecoderModel::Linear(m) => m.param_count(),
        }
    }

    pub fn buffer_count(&self) -> usize {
        match self {
            DecoderModel::Nn(m) | DecoderModel::StNn(m) => m.buffer_count(),
            _ => 0,
        }
    }
}

pub(crate) fn row_to_vec<S: Real>(frame: &FeatureFrame, row: usize) -> Vec<S> {
    frame.row(row).iter().map(|&v| S::of(f64::from(v))).collect()
}

pub(crate) fn rows_to_matrix<S: Real>(frame: &FeatureFrame, rows: &[usize]) -> Matrix<S> {
    let d = frame.dim();
    let mut m = Matrix::zeros(rows.len(), d);
    for (i, &r) in rows.iter().enumerate() {
        for (dst, &v) in m.row_mut(i).iter_mut().zip(frame.row(r)) {
            *dst = S::of(f64::from(v));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureConfig;

    fn tiny_frame(mode: FeatureMode) -> FeatureFrame {
        let dim = match mode {
            FeatureMode::Segmented => 6,
            _ => 3,
        };
        FeatureFrame {
            mode,
            n_channels: 3,
            n_segments: if mode == FeatureMode::Segmented { 2 } else { 1 },
            t_bin_ms: 8,
            t_s_ms: match mode {
                FeatureMode::Binary => 8,
                _ => 4,
            },
            sample_times_us: vec![8000, 12_000],
            x: vec![1.0; 2 * dim],
            y: vec![[0.0, 0.0]; 2],
            reach_ids: vec![0, 0],
        }
    }

    #[test]
    fn mode_compatibility_table() {
        assert!(DecoderKind::Nn.accepts(FeatureMode::Frame));
        assert!(!DecoderKind::Nn.accepts(FeatureMode::Binary));
        assert!(DecoderKind::StNn.accepts(FeatureMode::Segmented));
        assert!(!DecoderKind::StNn.accepts(FeatureMode::Frame));
        assert!(DecoderKind::Snn.accepts(FeatureMode::Binary));
        assert!(!DecoderKind::Snn.accepts(FeatureMode::Frame));
        assert!(DecoderKind::Linear.accepts(FeatureMode::Frame));
        assert!(DecoderKind::Linear.accepts(FeatureMode::Segmented));
        let _ = FeatureConfig::frame(200, 4); // modes originate here
    }

    #[test]
    fn predict_is_deterministic() {
        let mut rng = crate::seeds::rng(3, 3);
        let model = DecoderModel::Nn(MlpDecoder::<f64>::new(3, 0.5, &mut rng));
        let frame = tiny_frame(FeatureMode::Frame);
        let a = model.predict(&frame, &[0, 1]).unwrap();
        let b = model.predict(&frame, &[0, 1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mode_mismatch_is_an_error() {
        let mut rng = crate::seeds::rng(3, 4);
        let model = DecoderModel::Snn(SnnDecoder::<f64>::new(3, 0.3, &mut rng));
        let frame = tiny_frame(FeatureMode::Frame);
        assert!(matches!(
            model.predict(&frame, &[0]),
            Err(DecoderError::ModeMismatch { .. })
        ));
    }

    #[test]
    fn chunked_stateful_prediction_matches_one_shot() {
        let mut rng = crate::seeds::rng(5, 6);
        let model = DecoderModel::Snn(SnnDecoder::<f64>::new(3, 0.3, &mut rng));
        let frame = tiny_frame(FeatureMode::Binary);
        let one = model.predict(&frame, &[0, 1]).unwrap();

        let mut state = model.initial_state();
        let a = model.predict_with_state(&frame, &[0], &mut state).unwrap();
        let b = model.predict_with_state(&frame, &[1], &mut state).unwrap();
        assert_eq!(one, vec![a[0], b[0]]);
    }
}
