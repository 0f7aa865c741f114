//! Feedforward decoder: dense -> batch-norm -> ReLU -> dropout, twice, then a
//! dense head to (v_x, v_y). Used for both the frame-input and segmented-input
//! variants (they differ only in input width).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::batchnorm::{BatchNormLayer, BnCache, BnGrads};
use super::dense::{DenseGrads, DenseLayer};
use super::matrix::Matrix;
use super::real::Real;
use super::DecoderError;

pub const HIDDEN_1: usize = 32;
pub const HIDDEN_2: usize = 48;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpDecoder<S> {
    pub dense1: DenseLayer<S>,
    pub bn1: BatchNormLayer<S>,
    pub dense2: DenseLayer<S>,
    pub bn2: BatchNormLayer<S>,
    pub dense3: DenseLayer<S>,
    pub dropout_p: f64,
}

pub struct MlpCache<S> {
    x: Matrix<S>,
    bn1: BnCache<S>,
    relu1_in: Matrix<S>,
    mask1: Option<Matrix<S>>,
    h1: Matrix<S>,
    bn2: BnCache<S>,
    relu2_in: Matrix<S>,
    mask2: Option<Matrix<S>>,
    h2: Matrix<S>,
}

#[derive(Clone, Debug)]
pub struct MlpGrads<S> {
    pub d1: DenseGrads<S>,
    pub bn1: BnGrads<S>,
    pub d2: DenseGrads<S>,
    pub bn2: BnGrads<S>,
    pub d3: DenseGrads<S>,
}

impl<S: Real> MlpDecoder<S> {
    pub fn new(input_dim: usize, dropout_p: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            dense1: DenseLayer::init(HIDDEN_1, input_dim, 2.0, rng),
            bn1: BatchNormLayer::new(HIDDEN_1),
            dense2: DenseLayer::init(HIDDEN_2, HIDDEN_1, 2.0, rng),
            bn2: BatchNormLayer::new(HIDDEN_2),
            dense3: DenseLayer::init(2, HIDDEN_2, 1.0, rng),
            dropout_p,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dense1.in_dim()
    }

    fn check_input(&self, cols: usize) -> Result<(), DecoderError> {
        if cols != self.input_dim() {
            return Err(DecoderError::DimensionMismatch {
                expected: self.input_dim(),
                got: cols,
            });
        }
        Ok(())
    }

    /// Evaluation forward: running batch-norm statistics, no dropout.
    pub fn forward_eval(&self, x: &Matrix<S>) -> Result<Matrix<S>, DecoderError> {
        self.check_input(x.cols)?;
        let a1 = self.dense1.forward_batch(x);
        let mut h1 = self.bn1.forward_eval(&a1);
        relu_inplace(&mut h1);
        let a2 = self.dense2.forward_batch(&h1);
        let mut h2 = self.bn2.forward_eval(&a2);
        relu_inplace(&mut h2);
        Ok(self.dense3.forward_batch(&h2))
    }

    /// Per-sample evaluation that also reports the input vector to each
    /// parameterized layer, for effective-operation counting.
    pub fn eval_layer_inputs(&self, x: &[S]) -> Result<(Vec<S>, [Vec<S>; 3]), DecoderError> {
        self.check_input(x.len())?;
        let a1 = self.dense1.forward_vec(x);
        let h1: Vec<S> = self
            .bn1
            .forward_vec_eval(&a1)
            .into_iter()
            .map(|v| v.max(S::zero()))
            .collect();
        let a2 = self.dense2.forward_vec(&h1);
        let h2: Vec<S> = self
            .bn2
            .forward_vec_eval(&a2)
            .into_iter()
            .map(|v| v.max(S::zero()))
            .collect();
        let out = self.dense3.forward_vec(&h2);
        Ok((out, [x.to_vec(), h1, h2]))
    }

    /// Training forward: batch statistics (running stats updated) and fresh
    /// dropout masks drawn from `rng`.
    pub fn forward_train(
        &mut self,
        x: &Matrix<S>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Matrix<S>, MlpCache<S>), DecoderError> {
        self.check_input(x.cols)?;
        let p = self.dropout_p;

        let a1 = self.dense1.forward_batch(x);
        let (b1, bn1) = self.bn1.forward_train(&a1);
        let relu1_in = b1.clone();
        let mut h1 = b1;
        relu_inplace(&mut h1);
        let mask1 = dropout_mask(h1.rows, h1.cols, p, rng);
        if let Some(m) = &mask1 {
            apply_mask(&mut h1, m);
        }

        let a2 = self.dense2.forward_batch(&h1);
        let (b2, bn2) = self.bn2.forward_train(&a2);
        let relu2_in = b2.clone();
        let mut h2 = b2;
        relu_inplace(&mut h2);
        let mask2 = dropout_mask(h2.rows, h2.cols, p, rng);
        if let Some(m) = &mask2 {
            apply_mask(&mut h2, m);
        }

        let out = self.dense3.forward_batch(&h2);
        Ok((
            out,
            MlpCache {
                x: x.clone(),
                bn1,
                relu1_in,
                mask1,
                h1,
                bn2,
                relu2_in,
                mask2,
                h2,
            },
        ))
    }

    /// Deterministic forward for gradient checks: batch-norm statistics
    /// frozen at the running estimates, dropout disabled.
    pub fn forward_frozen(&self, x: &Matrix<S>) -> Result<(Matrix<S>, MlpCache<S>), DecoderError> {
        self.check_input(x.cols)?;
        let a1 = self.dense1.forward_batch(x);
        let (b1, bn1) = self.bn1.forward_eval_cached(&a1);
        let relu1_in = b1.clone();
        let mut h1 = b1;
        relu_inplace(&mut h1);

        let a2 = self.dense2.forward_batch(&h1);
        let (b2, bn2) = self.bn2.forward_eval_cached(&a2);
        let relu2_in = b2.clone();
        let mut h2 = b2;
        relu_inplace(&mut h2);

        let out = self.dense3.forward_batch(&h2);
        Ok((
            out,
            MlpCache {
                x: x.clone(),
                bn1,
                relu1_in,
                mask1: None,
                h1,
                bn2,
                relu2_in,
                mask2: None,
                h2,
            },
        ))
    }

    /// Backward through whichever forward produced the cache.
    pub fn backward(&self, cache: &MlpCache<S>, dout: &Matrix<S>) -> MlpGrads<S> {
        let (d3, dh2) = self.dense3.backward_batch(&cache.h2, dout);

        let mut dh2 = dh2;
        if let Some(m) = &cache.mask2 {
            apply_mask(&mut dh2, m);
        }
        relu_backward_inplace(&mut dh2, &cache.relu2_in);
        let (bn2, da2) = self.bn2.backward(&cache.bn2, &dh2);
        let (d2, dh1) = self.dense2.backward_batch(&cache.h1, &da2);

        let mut dh1 = dh1;
        if let Some(m) = &cache.mask1 {
            apply_mask(&mut dh1, m);
        }
        relu_backward_inplace(&mut dh1, &cache.relu1_in);
        let (bn1, da1) = self.bn1.backward(&cache.bn1, &dh1);
        let (d1, _dx) = self.dense1.backward_batch(&cache.x, &da1);

        MlpGrads {
            d1,
            bn1,
            d2,
            bn2,
            d3,
        }
    }

    pub fn param_count(&self) -> usize {
        self.dense1.param_count()
            + self.bn1.param_count()
            + self.dense2.param_count()
            + self.bn2.param_count()
            + self.dense3.param_count()
    }

    pub fn buffer_count(&self) -> usize {
        self.bn1.buffer_count() + self.bn2.buffer_count()
    }

    pub fn params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        self.dense1.push_params(&mut out);
        self.bn1.push_params(&mut out);
        self.dense2.push_params(&mut out);
        self.bn2.push_params(&mut out);
        self.dense3.push_params(&mut out);
        out
    }

    pub fn set_params(&mut self, params: &[S]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        self.dense1.read_params(&mut it);
        self.bn1.read_params(&mut it);
        self.dense2.read_params(&mut it);
        self.bn2.read_params(&mut it);
        self.dense3.read_params(&mut it);
    }

    pub fn buffers(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.buffer_count());
        self.bn1.push_buffers(&mut out);
        self.bn2.push_buffers(&mut out);
        out
    }

    pub fn set_buffers(&mut self, buffers: &[S]) {
        assert_eq!(buffers.len(), self.buffer_count());
        let mut it = buffers.iter();
        self.bn1.read_buffers(&mut it);
        self.bn2.read_buffers(&mut it);
    }
}

impl<S: Real> MlpGrads<S> {
    /// Flattened in the canonical parameter order.
    pub fn to_vec(&self) -> Vec<S> {
        let mut out = Vec::new();
        self.d1.push(&mut out);
        self.bn1.push(&mut out);
        self.d2.push(&mut out);
        self.bn2.push(&mut out);
        self.d3.push(&mut out);
        out
    }
}

fn relu_inplace<S: Real>(m: &mut Matrix<S>) {
    for v in &mut m.data {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

fn relu_backward_inplace<S: Real>(dm: &mut Matrix<S>, pre: &Matrix<S>) {
    for (d, &a) in dm.data.iter_mut().zip(&pre.data) {
        if a <= S::zero() {
            *d = S::zero();
        }
    }
}

/// Inverted dropout: kept entries are scaled by 1/(1-p).
fn dropout_mask<S: Real>(
    rows: usize,
    cols: usize,
    p: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Matrix<S>> {
    if p <= 0.0 {
        return None;
    }
    let keep = S::of(1.0 / (1.0 - p));
    Some(Matrix::from_fn(rows, cols, |_, _| {
        if rng.gen_range(0.0..1.0) < p {
            S::zero()
        } else {
            keep
        }
    }))
}

fn apply_mask<S: Real>(m: &mut Matrix<S>, mask: &Matrix<S>) {
    for (v, &k) in m.data.iter_mut().zip(&mask.data) {
        *v = *v * k;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeroed(input_dim: usize) -> MlpDecoder<f64> {
        let mut rng = crate::seeds::rng(0, 0);
        let mut m = MlpDecoder::<f64>::new(input_dim, 0.0, &mut rng);
        let zeros = vec![0.0; m.param_count()];
        m.set_params(&zeros);
        m
    }

    #[test]
    fn all_zero_parameters_give_zero_output() {
        let m = zeroed(6);
        let x = Matrix::from_rows(3, 6, (0..18).map(|i| i as f64 * 0.3).collect());
        let y = m.forward_eval(&x).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_matches_straight_line_oracle() {
        // an independent naive recomputation of the eval path
        let mut rng = crate::seeds::rng(3, 1);
        let m = MlpDecoder::<f64>::new(5, 0.5, &mut rng);
        let x: Vec<f64> = vec![0.7, -1.2, 0.0, 2.5, 0.3];

        let oracle = |m: &MlpDecoder<f64>, x: &[f64]| -> Vec<f64> {
            let affine = |w: &Matrix<f64>, b: &[f64], x: &[f64]| -> Vec<f64> {
                (0..w.rows)
                    .map(|r| {
                        b[r] + (0..w.cols).map(|c| w.get(r, c) * x[c]).sum::<f64>()
                    })
                    .collect()
            };
            let bn = |l: &BatchNormLayer<f64>, x: &[f64]| -> Vec<f64> {
                x.iter()
                    .enumerate()
                    .map(|(c, &v)| {
                        l.gain[c] * (v - l.running_mean[c])
                            / (l.running_var[c] + 1e-5).sqrt()
                            + l.shift[c]
                    })
                    .collect()
            };
            let relu = |x: Vec<f64>| x.into_iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
            let h1 = relu(bn(&m.bn1, &affine(&m.dense1.w, &m.dense1.bias, x)));
            let h2 = relu(bn(&m.bn2, &affine(&m.dense2.w, &m.dense2.bias, &h1)));
            affine(&m.dense3.w, &m.dense3.bias, &h2)
        };

        let batch = Matrix::from_rows(1, 5, x.clone());
        let got = m.forward_eval(&batch).unwrap();
        let want = oracle(&m, &x);
        for c in 0..2 {
            let rel = (got.get(0, c) - want[c]).abs() / want[c].abs().max(1e-9);
            assert!(rel < 1e-6, "output {c}: {} vs {}", got.get(0, c), want[c]);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = zeroed(6);
        let x = Matrix::from_rows(1, 5, vec![0.0; 5]);
        assert!(matches!(
            m.forward_eval(&x),
            Err(DecoderError::DimensionMismatch { expected: 6, got: 5 })
        ));
    }

    #[test]
    fn params_round_trip() {
        let mut rng = crate::seeds::rng(9, 2);
        let mut m = MlpDecoder::<f64>::new(4, 0.5, &mut rng);
        let p = m.params();
        assert_eq!(p.len(), m.param_count());
        let mut p2 = p.clone();
        p2[0] += 1.5;
        m.set_params(&p2);
        assert_eq!(m.params(), p2);
        assert_eq!(m.dense1.w.data[0], p2[0]);
    }

    #[test]
    fn zero_input_output_is_bias_composition() {
        let mut rng = crate::seeds::rng(4, 7);
        let m = MlpDecoder::<f64>::new(8, 0.0, &mut rng);
        let x = Matrix::zeros(1, 8);
        let y = m.forward_eval(&x).unwrap();
        let (o, _) = m.eval_layer_inputs(&vec![0.0; 8]).unwrap();
        assert!((y.get(0, 0) - o[0]).abs() < 1e-12);
        assert!((y.get(0, 1) - o[1]).abs() < 1e-12);
    }
}
