//! Training: MSE loss, AdamW with decoupled weight decay, per-epoch cosine
//! learning-rate annealing, and best-validation-R² checkpointing.
//!
//! Frame decoders shuffle samples into batches; the stateful decoders walk
//! the training reaches chronologically, reset state at each reach start, and
//! take one optimizer step per reach with full BPTT inside it.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::linear::linear_fit;
use super::lstm::LstmDecoder;
use super::matrix::Matrix;
use super::mlp::MlpDecoder;
use super::real::Real;
use super::snn::SnnDecoder;
use super::{rows_to_matrix, DecoderError, DecoderKind, DecoderModel, SpikeMode};
use crate::features::{DatasetSplit, FeatureFrame, Partition};
use crate::seeds;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Dropout probability; `None` picks the per-kind default
    /// (0.5 for NN/ST-NN, 0.3 for SNN and LSTM).
    pub dropout: Option<f64>,
    /// Decoupled (AdamW) weight decay.
    pub weight_decay: f64,
    pub surrogate_alpha: f64,
    /// Ridge strength for the linear baseline.
    pub ridge_lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.005,
            batch_size: 512,
            dropout: None,
            weight_decay: 0.05,
            surrogate_alpha: super::surrogate::DEFAULT_ALPHA,
            ridge_lambda: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn dropout_for(&self, kind: DecoderKind) -> f64 {
        self.dropout.unwrap_or(match kind {
            DecoderKind::Nn | DecoderKind::StNn => 0.5,
            DecoderKind::Snn | DecoderKind::Lstm => 0.3,
            DecoderKind::Linear => 0.0,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_r2: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: u32,
    pub best_val_r2: f64,
}

pub struct Trained<S> {
    pub model: DecoderModel<S>,
    pub log: TrainingLog,
}

/// Per-epoch cosine annealing from the base rate toward zero.
pub fn cosine_lr(base: f64, epoch: u32, total_epochs: u32) -> f64 {
    if total_epochs == 0 {
        return base;
    }
    base * 0.5 * (1.0 + (std::f64::consts::PI * f64::from(epoch) / f64::from(total_epochs)).cos())
}

/// AdamW: Adam moments plus decoupled weight decay, all scaled by the
/// current learning rate so a zero rate leaves parameters untouched.
pub struct AdamW<S> {
    beta1: S,
    beta2: S,
    epsilon: S,
    weight_decay: S,
    m: Vec<S>,
    v: Vec<S>,
    t: i32,
}

impl<S: Real> AdamW<S> {
    pub fn new(n_params: usize, weight_decay: f64) -> Self {
        Self {
            beta1: S::of(0.9),
            beta2: S::of(0.999),
            epsilon: S::of(1e-8),
            weight_decay: S::of(weight_decay),
            m: vec![S::zero(); n_params],
            v: vec![S::zero(); n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, lr: f64, params: &mut [S], grads: &[S]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let lr = S::of(lr);
        let one = S::one();
        let bc1 = one - self.beta1.powi(self.t);
        let bc2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            let update = m_hat / (v_hat.sqrt() + self.epsilon) + self.weight_decay * params[i];
            params[i] = params[i] - lr * update;
        }
    }
}

/// Mean squared error over all outputs, plus its gradient.
fn mse_batch<S: Real>(out: &Matrix<S>, targets: &[[S; 2]]) -> (f64, Matrix<S>) {
    let n = out.rows;
    let mut dout = Matrix::zeros(n, 2);
    let mut loss = S::zero();
    let denom = S::of((n * 2) as f64);
    for r in 0..n {
        for c in 0..2 {
            let diff = out.get(r, c) - targets[r][c];
            loss = loss + diff * diff;
            dout.set(r, c, S::of(2.0) * diff / denom);
        }
    }
    (loss.as_f64() / (n * 2) as f64, dout)
}

fn mse_seq<S: Real>(outs: &[[S; 2]], targets: &[[S; 2]]) -> (f64, Vec<[S; 2]>) {
    let n = outs.len();
    let denom = S::of((n * 2) as f64);
    let mut douts = Vec::with_capacity(n);
    let mut loss = S::zero();
    for (o, t) in outs.iter().zip(targets) {
        let dx = o[0] - t[0];
        let dy = o[1] - t[1];
        loss = loss + dx * dx + dy * dy;
        douts.push([S::of(2.0) * dx / denom, S::of(2.0) * dy / denom]);
    }
    (loss.as_f64() / (n * 2) as f64, douts)
}

fn targets_of<S: Real>(frame: &FeatureFrame, rows: &[usize]) -> Vec<[S; 2]> {
    rows.iter()
        .map(|&r| {
            [
                S::of(f64::from(frame.y[r][0])),
                S::of(f64::from(frame.y[r][1])),
            ]
        })
        .collect()
}

/// Validation R² (mean of the x and y coefficients), evaluated in f64.
fn val_r2<S: Real>(model: &DecoderModel<S>, frame: &FeatureFrame, rows: &[usize]) -> f64 {
    let preds = match model.predict(frame, rows) {
        Ok(p) => p,
        Err(_) => return f64::NEG_INFINITY,
    };
    let y: Vec<[f64; 2]> = rows
        .iter()
        .map(|&r| [f64::from(frame.y[r][0]), f64::from(frame.y[r][1])])
        .collect();
    let y_hat: Vec<[f64; 2]> = preds
        .iter()
        .map(|p| [p[0].as_f64(), p[1].as_f64()])
        .collect();
    match crate::metrics::r2_xy(&y, &y_hat) {
        Ok(s) => s.mean,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Rows of each training reach, chronological.
fn reach_row_groups(frame: &FeatureFrame, reaches: &[u32]) -> Vec<Vec<usize>> {
    let mut sorted: Vec<u32> = reaches.to_vec();
    sorted.sort_unstable();
    sorted
        .iter()
        .map(|&reach| {
            (0..frame.n_samples())
                .filter(|&i| frame.reach_ids[i] == reach)
                .collect()
        })
        .filter(|rows: &Vec<usize>| !rows.is_empty())
        .collect()
}

/// Trains a decoder of the given kind on the frame's train partition,
/// checkpointing on validation R². Deterministic in `(cfg.seed, data)`.
pub fn train<S: Real>(
    kind: DecoderKind,
    frame: &FeatureFrame,
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<Trained<S>, DecoderError> {
    if !kind.accepts(frame.mode) {
        return Err(DecoderError::ModeMismatch {
            kind,
            mode: frame.mode,
        });
    }
    let train_rows = frame.rows_in(split.reaches(Partition::Train));
    let val_rows = frame.rows_in(split.reaches(Partition::Val));
    if train_rows.is_empty() {
        return Err(DecoderError::EmptyPartition("train".into()));
    }
    if val_rows.is_empty() {
        return Err(DecoderError::EmptyPartition("val".into()));
    }

    let mut init_rng = seeds::rng(cfg.seed, seeds::derive_str(0, "init"));
    let dropout_p = cfg.dropout_for(kind);
    let dim = frame.dim();

    let mut model: DecoderModel<S> = match kind {
        DecoderKind::Nn => DecoderModel::Nn(MlpDecoder::new(dim, dropout_p, &mut init_rng)),
        DecoderKind::StNn => DecoderModel::StNn(MlpDecoder::new(dim, dropout_p, &mut init_rng)),
        DecoderKind::Lstm => DecoderModel::Lstm(LstmDecoder::new(dim, dropout_p, &mut init_rng)),
        DecoderKind::Snn => {
            let mut snn = SnnDecoder::new(dim, dropout_p, &mut init_rng);
            snn.surrogate_alpha = S::of(cfg.surrogate_alpha);
            DecoderModel::Snn(snn)
        }
        DecoderKind::Linear => {
            // closed form; no epochs
            let rows: Vec<&[f32]> = train_rows.iter().map(|&r| frame.row(r)).collect();
            let targets: Vec<[f32; 2]> = train_rows.iter().map(|&r| frame.y[r]).collect();
            let model = DecoderModel::Linear(linear_fit(&rows, &targets, cfg.ridge_lambda)?);
            let r2 = val_r2(&model, frame, &val_rows);
            return Ok(Trained {
                model,
                log: TrainingLog {
                    epochs: vec![EpochStats {
                        epoch: 0,
                        learning_rate: 0.0,
                        train_loss: 0.0,
                        val_r2: r2,
                    }],
                    best_epoch: 0,
                    best_val_r2: r2,
                },
            });
        }
    };

    let mut opt = AdamW::<S>::new(model.param_count(), cfg.weight_decay);
    let mut shuffle_rng = seeds::rng(cfg.seed, seeds::derive_str(0, "shuffle"));
    let mut dropout_rng = seeds::rng(cfg.seed, seeds::derive_str(0, "dropout"));

    let mut log = TrainingLog::default();
    let mut best: Option<(f64, Vec<S>, Vec<S>, u32)> = None;

    let reach_groups = match kind {
        DecoderKind::Lstm | DecoderKind::Snn => {
            reach_row_groups(frame, split.reaches(Partition::Train))
        }
        _ => Vec::new(),
    };

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(cfg.learning_rate, epoch, cfg.epochs);
        let mut loss_sum = 0.0;
        let mut loss_weight = 0.0;

        match &mut model {
            DecoderModel::Nn(mlp) | DecoderModel::StNn(mlp) => {
                let mut order = train_rows.clone();
                order.shuffle(&mut shuffle_rng);
                for chunk in order.chunks(cfg.batch_size.max(1)) {
                    let x = rows_to_matrix::<S>(frame, chunk);
                    let targets = targets_of::<S>(frame, chunk);
                    let (out, cache) = mlp.forward_train(&x, &mut dropout_rng)?;
                    let (loss, dout) = mse_batch(&out, &targets);
                    let grads = mlp.backward(&cache, &dout);
                    let mut params = mlp.params();
                    opt.step(lr, &mut params, &grads.to_vec());
                    mlp.set_params(&params);
                    loss_sum += loss * chunk.len() as f64;
                    loss_weight += chunk.len() as f64;
                }
            }
            DecoderModel::Lstm(lstm) => {
                for rows in &reach_groups {
                    let xs: Vec<Vec<S>> =
                        rows.iter().map(|&r| super::row_to_vec(frame, r)).collect();
                    let targets = targets_of::<S>(frame, rows);
                    let mut state = super::LstmState::zeros(lstm.hidden);
                    let rng = (lstm.dropout_p > 0.0).then_some(&mut dropout_rng);
                    let (outs, cache) = lstm.forward_seq(&xs, &mut state, rng)?;
                    let (loss, douts) = mse_seq(&outs, &targets);
                    let grads = lstm.backward_seq(&cache, &douts);
                    let mut params = lstm.params();
                    opt.step(lr, &mut params, &grads.to_vec());
                    lstm.set_params(&params);
                    loss_sum += loss * rows.len() as f64;
                    loss_weight += rows.len() as f64;
                }
            }
            DecoderModel::Snn(snn) => {
                for rows in &reach_groups {
                    let xs: Vec<Vec<S>> =
                        rows.iter().map(|&r| super::row_to_vec(frame, r)).collect();
                    let targets = targets_of::<S>(frame, rows);
                    let mut state = snn.reset_state();
                    let rng = (snn.dropout_p > 0.0).then_some(&mut dropout_rng);
                    let (outs, cache) =
                        snn.forward_seq(&xs, &mut state, SpikeMode::Hard, None, rng)?;
                    let (loss, douts) = mse_seq(&outs, &targets);
                    let grads = snn.backward_seq(&cache, &douts);
                    let mut params = snn.params();
                    opt.step(lr, &mut params, &grads.to_vec());
                    snn.set_params(&params);
                    loss_sum += loss * rows.len() as f64;
                    loss_weight += rows.len() as f64;
                }
            }
            DecoderModel::Linear(_) => unreachable!("linear handled above"),
        }

        let r2 = val_r2(&model, frame, &val_rows);
        log.epochs.push(EpochStats {
            epoch,
            learning_rate: lr,
            train_loss: if loss_weight > 0.0 {
                loss_sum / loss_weight
            } else {
                0.0
            },
            val_r2: r2,
        });
        if best.as_ref().is_none_or(|(b, ..)| r2 > *b) {
            best = Some((r2, model.params(), model.buffers(), epoch));
        }
    }

    if let Some((r2, params, buffers, epoch)) = best {
        model.set_params(&params);
        model.set_buffers(&buffers);
        log.best_epoch = epoch;
        log.best_val_r2 = r2;
    }
    Ok(Trained { model, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMode;

    fn synthetic_frame(n_reaches: u32, rows_per_reach: usize, mode: FeatureMode) -> FeatureFrame {
        // features carry a linear signal so decoders have something to learn
        let n = n_reaches as usize * rows_per_reach;
        let n_channels = 6u16;
        let mut rng = crate::seeds::rng(100, 0);
        use rand::Rng;
        let mut x = Vec::with_capacity(n * n_channels as usize);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let phase = i as f32 * 0.07;
            let vx = phase.sin();
            let vy = phase.cos() * 0.5;
            for c in 0..n_channels {
                let drive = 1.0 + vx * (c as f32 * 0.9).sin() + vy * (c as f32 * 1.3).cos();
                let v = match mode {
                    FeatureMode::Binary => {
                        if rng.gen_range(0.0f32..1.0) < (drive * 0.3).clamp(0.05, 0.95) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    _ => (drive * 2.0).max(0.0).round(),
                };
                x.push(v);
            }
            y.push([vx, vy]);
        }
        FeatureFrame {
            mode,
            n_channels,
            n_segments: 1,
            t_bin_ms: if mode == FeatureMode::Binary { 4 } else { 200 },
            t_s_ms: 4,
            sample_times_us: (0..n as u64).map(|k| 200_000 + k * 4000).collect(),
            x,
            y,
            reach_ids: (0..n)
                .map(|i| (i / rows_per_reach) as u32)
                .collect(),
        }
    }

    fn split_of(frame: &FeatureFrame) -> DatasetSplit {
        let n = *frame.reach_ids.last().unwrap() as usize + 1;
        crate::features::split_reach_count(n).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_bitwise_unchanged() {
        let frame = synthetic_frame(4, 30, FeatureMode::Frame);
        let split = split_of(&frame);
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            ..Default::default()
        };

        // reproduce the init to capture the starting parameters
        let mut init_rng = seeds::rng(cfg.seed, seeds::derive_str(0, "init"));
        let reference = MlpDecoder::<f32>::new(frame.dim(), 0.5, &mut init_rng);

        let trained = train::<f32>(DecoderKind::Nn, &frame, &split, &cfg).unwrap();
        assert_eq!(trained.model.params(), reference.params());
    }

    #[test]
    fn same_seed_same_model_bitwise() {
        let frame = synthetic_frame(4, 25, FeatureMode::Frame);
        let split = split_of(&frame);
        let cfg = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        let a = train::<f32>(DecoderKind::Nn, &frame, &split, &cfg).unwrap();
        let b = train::<f32>(DecoderKind::Nn, &frame, &split, &cfg).unwrap();
        assert_eq!(a.model.params(), b.model.params());
        assert_eq!(a.model.buffers(), b.model.buffers());

        let c = train::<f32>(
            DecoderKind::Nn,
            &frame,
            &split,
            &TrainConfig {
                epochs: 3,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(a.model.params(), c.model.params());
    }

    #[test]
    fn small_mlp_memorizes_a_tiny_dataset() {
        // capacity check: a ~5k-parameter net drives 32 points to ~zero MSE
        let mut frame = synthetic_frame(4, 8, FeatureMode::Frame);
        assert_eq!(frame.n_samples(), 32);
        // make all 32 samples the training set and reuse them for val
        frame.reach_ids = (0..32).map(|i| (i / 8) as u32).collect();
        let split = DatasetSplit {
            train: vec![0, 1, 2, 3],
            val: vec![0],
            test: vec![3],
        };
        let cfg = TrainConfig {
            epochs: 500,
            dropout: Some(0.0),
            weight_decay: 0.0,
            batch_size: 32,
            ..Default::default()
        };
        let trained = train::<f32>(DecoderKind::Nn, &frame, &split, &cfg).unwrap();

        // final train MSE in eval mode
        let rows: Vec<usize> = (0..32).collect();
        let preds = trained.model.predict(&frame, &rows).unwrap();
        let mse: f64 = rows
            .iter()
            .map(|&r| {
                let d0 = f64::from(preds[r][0] - frame.y[r][0]);
                let d1 = f64::from(preds[r][1] - frame.y[r][1]);
                (d0 * d0 + d1 * d1) / 2.0
            })
            .sum::<f64>()
            / 32.0;
        assert!(mse < 1e-3, "train MSE {mse} should be < 1e-3");
    }

    #[test]
    fn linear_training_reports_validation_r2() {
        let frame = synthetic_frame(6, 20, FeatureMode::Frame);
        let split = split_of(&frame);
        let cfg = TrainConfig::default();
        let trained = train::<f32>(DecoderKind::Linear, &frame, &split, &cfg).unwrap();
        assert!(trained.log.best_val_r2.is_finite());
        assert_eq!(trained.model.kind(), DecoderKind::Linear);
    }

    #[test]
    fn stateful_kinds_train_one_step_per_reach() {
        let frame = synthetic_frame(5, 15, FeatureMode::Binary);
        let split = split_of(&frame);
        let cfg = TrainConfig {
            epochs: 2,
            ..Default::default()
        };
        let trained = train::<f32>(DecoderKind::Snn, &frame, &split, &cfg).unwrap();
        assert_eq!(trained.log.epochs.len(), 2);
        assert!(trained.log.epochs[0].train_loss.is_finite());
    }

    #[test]
    fn cosine_schedule_starts_at_base_and_decays() {
        assert_eq!(cosine_lr(0.005, 0, 50), 0.005);
        assert!(cosine_lr(0.005, 49, 50) < 1e-4);
        assert!(cosine_lr(0.005, 25, 50) < 0.005);
    }

    #[test]
    fn incompatible_mode_is_rejected() {
        let frame = synthetic_frame(4, 10, FeatureMode::Frame);
        let split = split_of(&frame);
        let err = train::<f32>(DecoderKind::Snn, &frame, &split, &TrainConfig::default())
            .unwrap_err();
        assert!(matches!(err, DecoderError::ModeMismatch { .. }));
    }
}
