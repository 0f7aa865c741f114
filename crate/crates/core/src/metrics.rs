//! Evaluation and resource accounting: R² scoring, effective MAC/AC counts,
//! activation sparsity, a memory-traffic proxy, and model size.
//!
//! Operation counting conventions (documented because hardware papers vary):
//! weight-matrix operations keyed on exact zeros in the layer's input —
//! a dense layer contributes `nnz(input) * fan_out` effective MACs and its
//! bias adds `fan_out` ACs; LIF layers contribute `nnz(input_spikes) *
//! fan_out` ACs and zero MACs (binary inputs need no multiplies); the LSTM is
//! counted dense with gates always active. Elementwise work (batch-norm,
//! membrane decay, output scaling) is not counted. The memory column is an
//! explicit proxy: one weight read per effective operation,
//! `(macs + acs) * bits / 1000` kilobits per inference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoders::{DecoderError, DecoderModel, LSTM_HIDDEN};
use crate::evfilter::Ratio;
use crate::features::FeatureFrame;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("prediction/target length mismatch: {targets} vs {predictions}")]
    LengthMismatch {
        targets: usize,
        predictions: usize,
    },
    #[error("target variance is zero; R^2 is undefined")]
    ZeroVariance,
    #[error(transparent)]
    Decoder(#[from] DecoderError),
}

/// Coefficient of determination: `1 - SS_res / SS_tot`. Not clamped; a
/// predictor worse than the target mean scores negative.
pub fn r2_score(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    if y.len() != y_hat.len() {
        return Err(MetricsError::LengthMismatch {
            targets: y.len(),
            predictions: y_hat.len(),
        });
    }
    if y.len() < 2 {
        return Err(MetricsError::TooFewObservations(y.len()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let ss_res: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(v, p)| (v - p) * (v - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct R2Scores {
    pub x: f64,
    pub y: f64,
    pub mean: f64,
}

/// Componentwise R² over (v_x, v_y) plus their arithmetic mean.
pub fn r2_xy(targets: &[[f64; 2]], predictions: &[[f64; 2]]) -> Result<R2Scores, MetricsError> {
    let tx: Vec<f64> = targets.iter().map(|t| t[0]).collect();
    let ty: Vec<f64> = targets.iter().map(|t| t[1]).collect();
    let px: Vec<f64> = predictions.iter().map(|p| p[0]).collect();
    let py: Vec<f64> = predictions.iter().map(|p| p[1]).collect();
    let x = r2_score(&tx, &px)?;
    let y = r2_score(&ty, &py)?;
    Ok(R2Scores {
        x,
        y,
        mean: (x + y) / 2.0,
    })
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct OpCounts {
    /// Effective multiply-accumulates per inference, averaged over samples.
    pub macs: f64,
    /// Effective accumulate-only operations per inference.
    pub acs: f64,
    /// Fraction of zero entries among inputs to parameterized layers.
    pub activation_sparsity: f64,
}

/// Counts effective operations over the given evaluation rows.
///
/// Stateful decoders are stepped chronologically from a fresh state, so the
/// counts reflect the same pass `predict` would run.
pub fn count_ops(
    model: &DecoderModel<f32>,
    frame: &FeatureFrame,
    rows: &[usize],
) -> Result<OpCounts, MetricsError> {
    model.check_features(frame)?;
    if rows.is_empty() {
        return Ok(OpCounts::default());
    }

    let mut macs = 0u64;
    let mut acs = 0u64;
    let mut zeros = 0u64;
    let mut entries = 0u64;
    let mut count_dense = |input: &[f32], fan_out: usize| {
        let nnz = input.iter().filter(|&&v| v != 0.0).count();
        macs += (nnz * fan_out) as u64;
        acs += fan_out as u64; // bias adds
        zeros += (input.len() - nnz) as u64;
        entries += input.len() as u64;
    };

    match model {
        DecoderModel::Nn(mlp) | DecoderModel::StNn(mlp) => {
            for &r in rows {
                let x = crate::decoders::row_to_vec::<f32>(frame, r);
                let (_, layer_inputs) = mlp.eval_layer_inputs(&x)?;
                count_dense(&layer_inputs[0], crate::decoders::HIDDEN_1);
                count_dense(&layer_inputs[1], crate::decoders::HIDDEN_2);
                count_dense(&layer_inputs[2], 2);
            }
        }
        DecoderModel::Linear(lin) => {
            for &r in rows {
                count_dense(frame.row(r), 2);
                let _ = lin;
            }
        }
        DecoderModel::Lstm(_) => {
            // counted dense: gates always active, sparsity defined as 0
            let input = frame.dim();
            let per_step_macs = (4 * LSTM_HIDDEN * (input + LSTM_HIDDEN) + LSTM_HIDDEN * 2) as u64;
            let per_step_acs = (4 * LSTM_HIDDEN + 2) as u64;
            return Ok(OpCounts {
                macs: per_step_macs as f64,
                acs: per_step_acs as f64,
                activation_sparsity: 0.0,
            });
        }
        DecoderModel::Snn(snn) => {
            let mut state = snn.reset_state();
            let mut count_lif = |input: &[f32], fan_out: usize| {
                let nnz = input.iter().filter(|&&v| v != 0.0).count();
                acs += (nnz * fan_out) as u64;
                zeros += (input.len() - nnz) as u64;
                entries += input.len() as u64;
            };
            for &r in rows {
                let x = crate::decoders::row_to_vec::<f32>(frame, r);
                let (_, layer_inputs) = snn.step_eval_traced(&mut state, &x)?;
                count_lif(&layer_inputs[0], crate::decoders::SNN_HIDDEN_1);
                count_lif(&layer_inputs[1], crate::decoders::SNN_HIDDEN_2);
                count_lif(&layer_inputs[2], 2);
            }
        }
    }

    let n = rows.len() as f64;
    Ok(OpCounts {
        macs: macs as f64 / n,
        acs: acs as f64 / n,
        activation_sparsity: if entries > 0 {
            zeros as f64 / entries as f64
        } else {
            0.0
        },
    })
}

/// Model size in KB: every stored value (weights, biases, batch-norm
/// gain/shift and running statistics, LIF beta/threshold, output scales) at
/// `bits_per_param` bits.
pub fn model_size_kb(model: &DecoderModel<f32>, bits_per_param: u32) -> f64 {
    let values = (model.param_count() + model.buffer_count()) as f64;
    values * f64::from(bits_per_param) / 8.0 / 1000.0
}

/// Memory-traffic proxy in kilobits per inference: one weight read per
/// effective operation.
pub fn memory_traffic_kb(ops: &OpCounts, bits_per_param: u32) -> f64 {
    (ops.macs + ops.acs) * f64::from(bits_per_param) / 1000.0
}

/// One evaluation report row; mirrors the decoding-performance and
/// compute/memory tables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub r2_x: f64,
    pub r2_y: f64,
    pub r2_mean: f64,
    pub macs_per_inference: f64,
    pub acs_per_inference: f64,
    pub activation_sparsity: f64,
    /// Kilobits per inference under the documented weight-read proxy.
    pub memory_kb_per_inference: f64,
    pub model_size_kb: f64,
    /// Raw-to-filtered event count ratio of the input variant, if filtering
    /// was involved.
    pub compression_ratio: Option<Ratio>,
}

impl MetricsReport {
    pub fn from_parts(r2: R2Scores, ops: OpCounts, model_size_kb: f64) -> Self {
        Self {
            r2_x: r2.x,
            r2_y: r2.y,
            r2_mean: r2.mean,
            macs_per_inference: ops.macs,
            acs_per_inference: ops.acs,
            activation_sparsity: ops.activation_sparsity,
            memory_kb_per_inference: memory_traffic_kb(&ops, 32),
            model_size_kb,
            compression_ratio: None,
        }
    }
}
