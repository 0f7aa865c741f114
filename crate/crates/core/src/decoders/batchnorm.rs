//! Batch normalization with learnable gain/shift and running statistics.
//!
//! Training normalizes by batch statistics (biased variance) and backprops
//! through them; evaluation uses the running estimates, which makes the layer
//! a fixed affine map. Running variance uses the unbiased estimate, matching
//! the usual framework convention.

use super::matrix::Matrix;
use super::real::Real;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormLayer<S> {
    pub gain: Vec<S>,
    pub shift: Vec<S>,
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
}

#[derive(Clone, Debug)]
pub struct BnCache<S> {
    /// Normalized activations, needed for dgain.
    pub xhat: Matrix<S>,
    pub inv_std: Vec<S>,
    /// Whether the cache came from a batch-statistics (training) pass.
    pub batch_stats: bool,
}

#[derive(Clone, Debug)]
pub struct BnGrads<S> {
    pub dgain: Vec<S>,
    pub dshift: Vec<S>,
}

impl<S: Real> BatchNormLayer<S> {
    pub fn new(dim: usize) -> Self {
        Self {
            gain: vec![S::one(); dim],
            shift: vec![S::zero(); dim],
            running_mean: vec![S::zero(); dim],
            running_var: vec![S::one(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.gain.len()
    }

    /// Training pass: normalize by batch statistics and update running stats.
    pub fn forward_train(&mut self, x: &Matrix<S>) -> (Matrix<S>, BnCache<S>) {
        let n = x.rows;
        let d = self.dim();
        assert_eq!(x.cols, d);
        let n_s = S::of(n as f64);
        let eps = S::of(BN_EPSILON);
        let momentum = S::of(BN_MOMENTUM);

        let mut mean = vec![S::zero(); d];
        for r in 0..n {
            for (m, &v) in mean.iter_mut().zip(x.row(r)) {
                *m = *m + v;
            }
        }
        for m in &mut mean {
            *m = *m / n_s;
        }
        let mut var = vec![S::zero(); d];
        for r in 0..n {
            for ((vv, &v), &m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                let c = v - m;
                *vv = *vv + c * c;
            }
        }
        for v in &mut var {
            *v = *v / n_s; // biased, used for normalization
        }

        let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
        let mut xhat = Matrix::zeros(n, d);
        let mut y = Matrix::zeros(n, d);
        for r in 0..n {
            for c in 0..d {
                let h = (x.get(r, c) - mean[c]) * inv_std[c];
                xhat.set(r, c, h);
                y.set(r, c, self.gain[c] * h + self.shift[c]);
            }
        }

        // unbiased variance for the running estimate
        let bessel = if n > 1 {
            S::of(n as f64 / (n as f64 - 1.0))
        } else {
            S::one()
        };
        for c in 0..d {
            self.running_mean[c] =
                (S::one() - momentum) * self.running_mean[c] + momentum * mean[c];
            self.running_var[c] =
                (S::one() - momentum) * self.running_var[c] + momentum * var[c] * bessel;
        }

        (
            y,
            BnCache {
                xhat,
                inv_std,
                batch_stats: true,
            },
        )
    }

    /// Evaluation pass: fixed affine map from running statistics.
    pub fn forward_eval(&self, x: &Matrix<S>) -> Matrix<S> {
        let (y, _) = self.forward_eval_cached(x);
        y
    }

    /// Evaluation pass that also returns a cache, for frozen-stats gradient
    /// checks.
    pub fn forward_eval_cached(&self, x: &Matrix<S>) -> (Matrix<S>, BnCache<S>) {
        let n = x.rows;
        let d = self.dim();
        assert_eq!(x.cols, d);
        let eps = S::of(BN_EPSILON);
        let inv_std: Vec<S> = self
            .running_var
            .iter()
            .map(|&v| S::one() / (v + eps).sqrt())
            .collect();
        let mut xhat = Matrix::zeros(n, d);
        let mut y = Matrix::zeros(n, d);
        for r in 0..n {
            for c in 0..d {
                let h = (x.get(r, c) - self.running_mean[c]) * inv_std[c];
                xhat.set(r, c, h);
                y.set(r, c, self.gain[c] * h + self.shift[c]);
            }
        }
        (
            y,
            BnCache {
                xhat,
                inv_std,
                batch_stats: false,
            },
        )
    }

    pub fn forward_vec_eval(&self, x: &[S]) -> Vec<S> {
        let eps = S::of(BN_EPSILON);
        x.iter()
            .enumerate()
            .map(|(c, &v)| {
                let inv = S::one() / (self.running_var[c] + eps).sqrt();
                self.gain[c] * (v - self.running_mean[c]) * inv + self.shift[c]
            })
            .collect()
    }

    /// Backward through whichever forward produced the cache.
    pub fn backward(&self, cache: &BnCache<S>, dy: &Matrix<S>) -> (BnGrads<S>, Matrix<S>) {
        let n = dy.rows;
        let d = self.dim();
        let n_s = S::of(n as f64);

        let mut dgain = vec![S::zero(); d];
        let mut dshift = vec![S::zero(); d];
        for r in 0..n {
            for c in 0..d {
                dgain[c] = dgain[c] + dy.get(r, c) * cache.xhat.get(r, c);
                dshift[c] = dshift[c] + dy.get(r, c);
            }
        }

        let mut dx = Matrix::zeros(n, d);
        if cache.batch_stats {
            // dx = gain*inv_std/n * (n*dy - sum(dy) - xhat * sum(dy*xhat))
            for c in 0..d {
                let k = self.gain[c] * cache.inv_std[c] / n_s;
                for r in 0..n {
                    let v = n_s * dy.get(r, c) - dshift[c] - cache.xhat.get(r, c) * dgain[c];
                    dx.set(r, c, k * v);
                }
            }
        } else {
            // frozen statistics: plain affine backward
            for c in 0..d {
                let k = self.gain[c] * cache.inv_std[c];
                for r in 0..n {
                    dx.set(r, c, k * dy.get(r, c));
                }
            }
        }
        (BnGrads { dgain, dshift }, dx)
    }

    pub fn param_count(&self) -> usize {
        2 * self.dim()
    }

    pub fn buffer_count(&self) -> usize {
        2 * self.dim()
    }

    pub fn push_params(&self, out: &mut Vec<S>) {
        out.extend_from_slice(&self.gain);
        out.extend_from_slice(&self.shift);
    }

    pub fn read_params(&mut self, src: &mut std::slice::Iter<'_, S>) {
        for g in &mut self.gain {
            *g = *src.next().expect("parameter vector too short");
        }
        for s in &mut self.shift {
            *s = *src.next().expect("parameter vector too short");
        }
    }

    pub fn push_buffers(&self, out: &mut Vec<S>) {
        out.extend_from_slice(&self.running_mean);
        out.extend_from_slice(&self.running_var);
    }

    pub fn read_buffers(&mut self, src: &mut std::slice::Iter<'_, S>) {
        for m in &mut self.running_mean {
            *m = *src.next().expect("buffer vector too short");
        }
        for v in &mut self.running_var {
            *v = *src.next().expect("buffer vector too short");
        }
    }
}

impl<S: Real> BnGrads<S> {
    pub fn push(&self, out: &mut Vec<S>) {
        out.extend_from_slice(&self.dgain);
        out.extend_from_slice(&self.dshift);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_configuration_passes_through_in_eval() {
        // gain 1, shift 0, running stats (0, 1): y ~ x up to epsilon scaling
        let bn = BatchNormLayer::<f64>::new(3);
        let x = Matrix::from_rows(2, 3, vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0]);
        let y = bn.forward_eval(&x);
        for (a, b) in y.data.iter().zip(&x.data) {
            assert!((a - b / (1.0 + BN_EPSILON).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn train_pass_normalizes_batch() {
        let mut bn = BatchNormLayer::<f64>::new(2);
        let x = Matrix::from_rows(4, 2, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]);
        let (y, _) = bn.forward_train(&x);
        for c in 0..2 {
            let mean: f64 = (0..4).map(|r| y.get(r, c)).sum::<f64>() / 4.0;
            let var: f64 = (0..4).map(|r| (y.get(r, c) - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3); // epsilon shrinks it slightly
        }
        // running stats moved toward the batch statistics
        assert!((bn.running_mean[0] - 0.1 * 2.5).abs() < 1e-12);
    }

    /// Finite-difference check of the batch-statistics backward path: the
    /// loss depends on a parameter through the whole batch normalization.
    #[test]
    fn train_backward_matches_finite_differences() {
        let mut bn = BatchNormLayer::<f64>::new(2);
        bn.gain = vec![1.3, 0.7];
        bn.shift = vec![0.2, -0.4];
        let x = Matrix::from_rows(3, 2, vec![0.5, -1.0, 1.5, 2.0, -0.5, 0.3]);

        let loss = |bn: &mut BatchNormLayer<f64>, x: &Matrix<f64>| -> f64 {
            let (y, _) = bn.forward_train(x);
            y.data.iter().map(|v| v * v).sum::<f64>() * 0.5
        };

        let (y, cache) = bn.clone().forward_train(&x);
        let dy = y.clone();
        let (grads, dx) = bn.backward(&cache, &dy);

        let h = 1e-6;
        for c in 0..2 {
            let mut bp = bn.clone();
            bp.gain[c] += h;
            let mut bm = bn.clone();
            bm.gain[c] -= h;
            let fd = (loss(&mut bp, &x) - loss(&mut bm, &x)) / (2.0 * h);
            assert!((fd - grads.dgain[c]).abs() < 1e-6, "dgain[{c}]");
        }
        for i in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (loss(&mut bn.clone(), &xp) - loss(&mut bn.clone(), &xm)) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() < 1e-6, "dx[{i}]: fd {fd} vs {}", dx.data[i]);
        }
    }
}
