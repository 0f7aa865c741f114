//! Single-cell LSTM decoder with a dense head, trained by full BPTT within
//! each reach.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dense::{DenseGrads, DenseLayer};
use super::matrix::Matrix;
use super::real::Real;
use super::DecoderError;

pub const LSTM_HIDDEN: usize = 32;

/// Gate rows are stacked [input, forget, cell, output] in both weight
/// matrices and the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmDecoder<S> {
    pub w_ih: Matrix<S>,
    pub w_hh: Matrix<S>,
    pub bias: Vec<S>,
    pub head: DenseLayer<S>,
    pub hidden: usize,
    pub dropout_p: f64,
}

#[derive(Clone, Debug)]
pub struct LstmState<S> {
    pub h: Vec<S>,
    pub c: Vec<S>,
}

impl<S: Real> LstmState<S> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![S::zero(); hidden],
            c: vec![S::zero(); hidden],
        }
    }
}

struct StepRecord<S> {
    x: Vec<S>,
    h_prev: Vec<S>,
    c_prev: Vec<S>,
    i: Vec<S>,
    f: Vec<S>,
    g: Vec<S>,
    o: Vec<S>,
    tanh_c: Vec<S>,
    h_fed: Vec<S>,
    mask: Option<Vec<S>>,
}

pub struct LstmCache<S> {
    steps: Vec<StepRecord<S>>,
}

#[derive(Clone, Debug)]
pub struct LstmGrads<S> {
    pub dw_ih: Matrix<S>,
    pub dw_hh: Matrix<S>,
    pub dbias: Vec<S>,
    pub dhead: DenseGrads<S>,
}

impl<S: Real> LstmDecoder<S> {
    pub fn new(input_dim: usize, dropout_p: f64, rng: &mut ChaCha8Rng) -> Self {
        let hidden = LSTM_HIDDEN;
        let k = 1.0 / (hidden as f64).sqrt();
        let w_ih = Matrix::from_fn(4 * hidden, input_dim, |_, _| S::uniform(rng, -k, k));
        let w_hh = Matrix::from_fn(4 * hidden, hidden, |_, _| S::uniform(rng, -k, k));
        // forget-gate bias starts at 1 so early training retains state
        let mut bias = vec![S::zero(); 4 * hidden];
        for b in bias.iter_mut().take(2 * hidden).skip(hidden) {
            *b = S::one();
        }
        Self {
            w_ih,
            w_hh,
            bias,
            head: DenseLayer::init(2, hidden, 1.0, rng),
            hidden,
            dropout_p,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols
    }

    fn check_input(&self, len: usize) -> Result<(), DecoderError> {
        if len != self.input_dim() {
            return Err(DecoderError::DimensionMismatch {
                expected: self.input_dim(),
                got: len,
            });
        }
        Ok(())
    }

    fn gates(&self, x: &[S], h_prev: &[S]) -> (Vec<S>, Vec<S>, Vec<S>, Vec<S>) {
        let hd = self.hidden;
        let mut a = self.w_ih.matvec(x);
        let ah = self.w_hh.matvec(h_prev);
        for (av, (bv, &b)) in a.iter_mut().zip(ah.iter().zip(&self.bias)) {
            *av = *av + *bv + b;
        }
        let i: Vec<S> = a[0..hd].iter().map(|&v| v.sigmoid()).collect();
        let f: Vec<S> = a[hd..2 * hd].iter().map(|&v| v.sigmoid()).collect();
        let g: Vec<S> = a[2 * hd..3 * hd].iter().map(|&v| v.tanh()).collect();
        let o: Vec<S> = a[3 * hd..4 * hd].iter().map(|&v| v.sigmoid()).collect();
        (i, f, g, o)
    }

    /// One evaluation step: advances the state, returns (v_x, v_y).
    pub fn step_eval(&self, state: &mut LstmState<S>, x: &[S]) -> Result<[S; 2], DecoderError> {
        self.check_input(x.len())?;
        let (i, f, g, o) = self.gates(x, &state.h);
        for j in 0..self.hidden {
            state.c[j] = f[j] * state.c[j] + i[j] * g[j];
            state.h[j] = o[j] * state.c[j].tanh();
        }
        let out = self.head.forward_vec(&state.h);
        Ok([out[0], out[1]])
    }

    /// Sequence forward with caching for BPTT. Dropout (if enabled and an RNG
    /// is given) applies to the hidden vector feeding the head.
    pub fn forward_seq(
        &self,
        xs: &[Vec<S>],
        state: &mut LstmState<S>,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Vec<[S; 2]>, LstmCache<S>), DecoderError> {
        let hd = self.hidden;
        let mut outs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            self.check_input(x.len())?;
            let h_prev = state.h.clone();
            let c_prev = state.c.clone();
            let (i, f, g, o) = self.gates(x, &h_prev);
            let mut tanh_c = vec![S::zero(); hd];
            for j in 0..hd {
                state.c[j] = f[j] * c_prev[j] + i[j] * g[j];
                tanh_c[j] = state.c[j].tanh();
                state.h[j] = o[j] * tanh_c[j];
            }

            let mask = match (&mut dropout_rng, self.dropout_p > 0.0) {
                (Some(rng), true) => {
                    let keep = S::of(1.0 / (1.0 - self.dropout_p));
                    Some(
                        (0..hd)
                            .map(|_| {
                                if rng.gen_range(0.0..1.0) < self.dropout_p {
                                    S::zero()
                                } else {
                                    keep
                                }
                            })
                            .collect::<Vec<S>>(),
                    )
                }
                _ => None,
            };
            let h_fed: Vec<S> = match &mask {
                Some(m) => state.h.iter().zip(m).map(|(&h, &k)| h * k).collect(),
                None => state.h.clone(),
            };

            let out = self.head.forward_vec(&h_fed);
            outs.push([out[0], out[1]]);
            steps.push(StepRecord {
                x: x.clone(),
                h_prev,
                c_prev,
                i,
                f,
                g,
                o,
                tanh_c,
                h_fed,
                mask,
            });
        }
        Ok((outs, LstmCache { steps }))
    }

    /// Full BPTT over the cached sequence.
    pub fn backward_seq(&self, cache: &LstmCache<S>, douts: &[[S; 2]]) -> LstmGrads<S> {
        let hd = self.hidden;
        assert_eq!(douts.len(), cache.steps.len());

        let mut dw_ih = Matrix::zeros(4 * hd, self.input_dim());
        let mut dw_hh = Matrix::zeros(4 * hd, hd);
        let mut dbias = vec![S::zero(); 4 * hd];
        let mut dhead = DenseGrads::zeros(2, hd);

        let mut dh_next = vec![S::zero(); hd];
        let mut dc_next = vec![S::zero(); hd];
        for (t, rec) in cache.steps.iter().enumerate().rev() {
            // head: out = w_head . h_fed + b
            let dout = &douts[t];
            dhead.dw.add_outer(&dout[..], &rec.h_fed);
            for (db, &d) in dhead.dbias.iter_mut().zip(dout) {
                *db = *db + d;
            }
            let mut dh = self.head.w.matvec_t(&dout[..]);
            if let Some(m) = &rec.mask {
                for (d, &k) in dh.iter_mut().zip(m) {
                    *d = *d * k;
                }
            }
            for (d, &n) in dh.iter_mut().zip(&dh_next) {
                *d = *d + n;
            }

            // cell: c = f.c_prev + i.g ; h = o.tanh(c)
            let mut da = vec![S::zero(); 4 * hd];
            let mut dc_prev = vec![S::zero(); hd];
            for j in 0..hd {
                let do_ = dh[j] * rec.tanh_c[j];
                let dc = dc_next[j] + dh[j] * rec.o[j] * (S::one() - rec.tanh_c[j] * rec.tanh_c[j]);
                let di = dc * rec.g[j];
                let df = dc * rec.c_prev[j];
                let dg = dc * rec.i[j];
                dc_prev[j] = dc * rec.f[j];
                da[j] = di * rec.i[j] * (S::one() - rec.i[j]);
                da[hd + j] = df * rec.f[j] * (S::one() - rec.f[j]);
                da[2 * hd + j] = dg * (S::one() - rec.g[j] * rec.g[j]);
                da[3 * hd + j] = do_ * rec.o[j] * (S::one() - rec.o[j]);
            }

            dw_ih.add_outer(&da, &rec.x);
            dw_hh.add_outer(&da, &rec.h_prev);
            for (db, &d) in dbias.iter_mut().zip(&da) {
                *db = *db + d;
            }
            dh_next = self.w_hh.matvec_t(&da);
            dc_next = dc_prev;
        }

        LstmGrads {
            dw_ih,
            dw_hh,
            dbias,
            dhead,
        }
    }

    pub fn param_count(&self) -> usize {
        self.w_ih.data.len() + self.w_hh.data.len() + self.bias.len() + self.head.param_count()
    }

    pub fn params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.w_ih.data);
        out.extend_from_slice(&self.w_hh.data);
        out.extend_from_slice(&self.bias);
        self.head.push_params(&mut out);
        out
    }

    pub fn set_params(&mut self, params: &[S]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        for w in &mut self.w_ih.data {
            *w = *it.next().unwrap();
        }
        for w in &mut self.w_hh.data {
            *w = *it.next().unwrap();
        }
        for b in &mut self.bias {
            *b = *it.next().unwrap();
        }
        self.head.read_params(&mut it);
    }
}

impl<S: Real> LstmGrads<S> {
    pub fn to_vec(&self) -> Vec<S> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.dw_ih.data);
        out.extend_from_slice(&self.dw_hh.data);
        out.extend_from_slice(&self.dbias);
        self.dhead.push(&mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_keep_zero_output() {
        let mut rng = crate::seeds::rng(0, 0);
        let mut m = LstmDecoder::<f64>::new(4, 0.0, &mut rng);
        m.set_params(&vec![0.0; m.param_count()]);
        let mut state = LstmState::zeros(m.hidden);
        for _ in 0..5 {
            let out = m.step_eval(&mut state, &[1.0, -2.0, 0.5, 3.0]).unwrap();
            assert_eq!(out, [0.0, 0.0]);
        }
        assert!(state.h.iter().all(|&h| h == 0.0));
    }

    /// Gate-by-gate recomputation of a single step, independent of the
    /// forward implementation.
    #[test]
    fn single_step_matches_gate_oracle() {
        let mut rng = crate::seeds::rng(5, 5);
        let m = LstmDecoder::<f64>::new(3, 0.0, &mut rng);
        let x = vec![0.4, -0.9, 1.3];
        let h_prev = vec![0.05; LSTM_HIDDEN];
        let c_prev = vec![-0.02; LSTM_HIDDEN];

        let mut state = LstmState {
            h: h_prev.clone(),
            c: c_prev.clone(),
        };
        let got = m.step_eval(&mut state, &x).unwrap();

        // oracle
        let hd = m.hidden;
        let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut a = vec![0.0f64; 4 * hd];
        for (r, av) in a.iter_mut().enumerate() {
            let mut acc = m.bias[r];
            for (c, &xv) in x.iter().enumerate() {
                acc += m.w_ih.get(r, c) * xv;
            }
            for (c, &hv) in h_prev.iter().enumerate() {
                acc += m.w_hh.get(r, c) * hv;
            }
            *av = acc;
        }
        for j in 0..hd {
            let i = sigmoid(a[j]);
            let f = sigmoid(a[hd + j]);
            let g = a[2 * hd + j].tanh();
            let o = sigmoid(a[3 * hd + j]);
            let c = f * c_prev[j] + i * g;
            let h = o * c.tanh();
            assert!((state.c[j] - c).abs() < 1e-10, "c[{j}]");
            assert!((state.h[j] - h).abs() < 1e-10, "h[{j}]");
        }
        let mut out = [m.head.bias[0], m.head.bias[1]];
        for (r, ov) in out.iter_mut().enumerate() {
            for (c, &hv) in state.h.iter().enumerate() {
                *ov += m.head.w.get(r, c) * hv;
            }
        }
        assert!((got[0] - out[0]).abs() < 1e-10);
        assert!((got[1] - out[1]).abs() < 1e-10);
    }

    #[test]
    fn chunked_equals_one_shot() {
        let mut rng = crate::seeds::rng(6, 1);
        let m = LstmDecoder::<f64>::new(3, 0.0, &mut rng);
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![(i as f64 * 0.3).sin(), 0.5, -(i as f64) * 0.1])
            .collect();

        let mut s1 = LstmState::zeros(m.hidden);
        let (one_shot, _) = m.forward_seq(&xs, &mut s1, None).unwrap();

        let mut s2 = LstmState::zeros(m.hidden);
        let (first, _) = m.forward_seq(&xs[..4], &mut s2, None).unwrap();
        let (second, _) = m.forward_seq(&xs[4..], &mut s2, None).unwrap();

        let chunked: Vec<[f64; 2]> = first.into_iter().chain(second).collect();
        assert_eq!(one_shot, chunked);
        assert_eq!(s1.h, s2.h);
    }

    #[test]
    fn step_eval_agrees_with_forward_seq() {
        let mut rng = crate::seeds::rng(2, 8);
        let m = LstmDecoder::<f64>::new(2, 0.0, &mut rng);
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.2, -0.4]).collect();
        let mut s1 = LstmState::zeros(m.hidden);
        let (outs, _) = m.forward_seq(&xs, &mut s1, None).unwrap();
        let mut s2 = LstmState::zeros(m.hidden);
        for (t, x) in xs.iter().enumerate() {
            let o = m.step_eval(&mut s2, x).unwrap();
            assert_eq!(o, outs[t]);
        }
    }
}
