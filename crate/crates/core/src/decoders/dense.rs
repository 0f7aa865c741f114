//! Fully connected layer with hand-derived gradients.

use rand_chacha::ChaCha8Rng;

use super::matrix::{matmul_nn, matmul_nt, matmul_tn, Matrix};
use super::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<S> {
    /// out x in weight matrix.
    pub w: Matrix<S>,
    pub bias: Vec<S>,
}

#[derive(Clone, Debug)]
pub struct DenseGrads<S> {
    pub dw: Matrix<S>,
    pub dbias: Vec<S>,
}

impl<S: Real> DenseLayer<S> {
    /// He-normal initialization (std `sqrt(gain / fan_in)`), zero bias.
    pub fn init(out_dim: usize, in_dim: usize, gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let std = (gain / in_dim as f64).sqrt();
        let w = Matrix::from_fn(out_dim, in_dim, |_, _| {
            S::standard_normal(rng) * S::of(std)
        });
        Self {
            w,
            bias: vec![S::zero(); out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols
    }

    pub fn forward_vec(&self, x: &[S]) -> Vec<S> {
        let mut y = self.w.matvec(x);
        for (yo, &b) in y.iter_mut().zip(&self.bias) {
            *yo = *yo + b;
        }
        y
    }

    /// y = x . w^T + bias, row-wise over the batch.
    pub fn forward_batch(&self, x: &Matrix<S>) -> Matrix<S> {
        let mut y = matmul_nt(x, &self.w);
        for r in 0..y.rows {
            for (v, &b) in y.row_mut(r).iter_mut().zip(&self.bias) {
                *v = *v + b;
            }
        }
        y
    }

    /// Gradients given the cached input and upstream dy; also returns dx.
    pub fn backward_batch(&self, x: &Matrix<S>, dy: &Matrix<S>) -> (DenseGrads<S>, Matrix<S>) {
        let dw = matmul_tn(dy, x);
        let mut dbias = vec![S::zero(); self.out_dim()];
        for r in 0..dy.rows {
            for (db, &d) in dbias.iter_mut().zip(dy.row(r)) {
                *db = *db + d;
            }
        }
        let dx = matmul_nn(dy, &self.w);
        (DenseGrads { dw, dbias }, dx)
    }

    pub fn param_count(&self) -> usize {
        self.w.data.len() + self.bias.len()
    }

    pub fn push_params(&self, out: &mut Vec<S>) {
        out.extend_from_slice(&self.w.data);
        out.extend_from_slice(&self.bias);
    }

    pub fn read_params(&mut self, src: &mut std::slice::Iter<'_, S>) {
        for w in &mut self.w.data {
            *w = *src.next().expect("parameter vector too short");
        }
        for b in &mut self.bias {
            *b = *src.next().expect("parameter vector too short");
        }
    }
}

impl<S: Real> DenseGrads<S> {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            dw: Matrix::zeros(out_dim, in_dim),
            dbias: vec![S::zero(); out_dim],
        }
    }

    pub fn push(&self, out: &mut Vec<S>) {
        out.extend_from_slice(&self.dw.data);
        out.extend_from_slice(&self.dbias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_hand_computation() {
        let layer = DenseLayer {
            w: Matrix::from_rows(2, 3, vec![1.0, -1.0, 0.5, 0.0, 2.0, -2.0]),
            bias: vec![0.1, -0.1],
        };
        assert_eq!(layer.forward_vec(&[1.0, 2.0, 4.0]), vec![1.1, -4.1]);
    }

    #[test]
    fn batch_and_vector_forward_agree() {
        let mut rng = crate::seeds::rng(1, 1);
        let layer = DenseLayer::<f64>::init(4, 3, 2.0, &mut rng);
        let x = Matrix::from_rows(2, 3, vec![0.3, -0.2, 0.9, 1.0, 0.0, -1.0]);
        let y = layer.forward_batch(&x);
        for r in 0..2 {
            let yv = layer.forward_vec(x.row(r));
            for c in 0..4 {
                assert!((y.get(r, c) - yv[c]).abs() < 1e-12);
            }
        }
    }
}
