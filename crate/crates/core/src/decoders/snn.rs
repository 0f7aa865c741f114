//! Spiking decoder: three fully connected LIF layers over binary per-step
//! inputs. The first two layers reset to zero on spiking; the last layer
//! never resets so its membrane accumulates, and the outputs are that
//! membrane scaled by a learnable pair.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::lif::{lif_backward_seq, LifLayer, LifState, LifStepRecord, ResetMode, SpikeMode};
use super::matrix::Matrix;
use super::real::Real;
use super::surrogate::DEFAULT_ALPHA;
use super::DecoderError;

pub const SNN_HIDDEN_1: usize = 32;
pub const SNN_HIDDEN_2: usize = 48;

#[derive(Clone, Debug, PartialEq)]
pub struct SnnDecoder<S> {
    pub l1: LifLayer<S>,
    pub l2: LifLayer<S>,
    pub l3: LifLayer<S>,
    /// Learnable scaling of the accumulated output membrane, one per output.
    pub output_scale: [S; 2],
    pub dropout_p: f64,
    pub surrogate_alpha: S,
}

#[derive(Clone, Debug)]
pub struct SnnState<S> {
    pub s1: LifState<S>,
    pub s2: LifState<S>,
    pub s3: LifState<S>,
}

pub struct SnnCache<S> {
    l1: Vec<LifStepRecord<S>>,
    l2: Vec<LifStepRecord<S>>,
    l3: Vec<LifStepRecord<S>>,
    mask1: Option<Vec<Vec<S>>>,
    mask2: Option<Vec<Vec<S>>>,
}

impl<S: Real> SnnCache<S> {
    /// Reset values per step for the two resetting layers, for replaying the
    /// forward pass with the reset path frozen (gradient checks).
    pub fn thetas(&self) -> SnnThetas<S> {
        SnnThetas {
            theta1: self.l1.iter().map(|r| r.theta.clone()).collect(),
            theta2: self.l2.iter().map(|r| r.theta.clone()).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SnnThetas<S> {
    pub theta1: Vec<Vec<S>>,
    pub theta2: Vec<Vec<S>>,
}

#[derive(Clone, Debug)]
pub struct SnnGrads<S> {
    pub dw1: Matrix<S>,
    pub draw_beta1: S,
    pub du_thr1: S,
    pub dw2: Matrix<S>,
    pub draw_beta2: S,
    pub du_thr2: S,
    pub dw3: Matrix<S>,
    pub draw_beta3: S,
    pub du_thr3: S,
    pub doutput_scale: [S; 2],
}

impl<S: Real> SnnDecoder<S> {
    pub fn new(input_dim: usize, dropout_p: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            l1: LifLayer::init(SNN_HIDDEN_1, input_dim, ResetMode::ToZero, rng),
            l2: LifLayer::init(SNN_HIDDEN_2, SNN_HIDDEN_1, ResetMode::ToZero, rng),
            l3: LifLayer::init(2, SNN_HIDDEN_2, ResetMode::NoReset, rng),
            output_scale: [S::one(), S::one()],
            dropout_p,
            surrogate_alpha: S::of(DEFAULT_ALPHA),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.l1.in_dim()
    }

    pub fn reset_state(&self) -> SnnState<S> {
        SnnState {
            s1: LifState::zeros(self.l1.out_dim()),
            s2: LifState::zeros(self.l2.out_dim()),
            s3: LifState::zeros(self.l3.out_dim()),
        }
    }

    fn check_input(&self, x: &[S]) -> Result<(), DecoderError> {
        if x.len() != self.input_dim() {
            return Err(DecoderError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if !x.iter().all(|&v| v == S::zero() || v == S::one()) {
            return Err(DecoderError::NonBinaryInput);
        }
        Ok(())
    }

    /// One evaluation step over a binary input vector.
    pub fn step_eval(&self, state: &mut SnnState<S>, x: &[S]) -> Result<[S; 2], DecoderError> {
        self.check_input(x)?;
        let alpha = self.surrogate_alpha;
        let r1 = self.l1.step(&mut state.s1, x, SpikeMode::Hard, alpha, None);
        let r2 = self
            .l2
            .step(&mut state.s2, &r1.s, SpikeMode::Hard, alpha, None);
        self.l3
            .step(&mut state.s3, &r2.s, SpikeMode::Hard, alpha, None);
        Ok([
            self.output_scale[0] * state.s3.u[0],
            self.output_scale[1] * state.s3.u[1],
        ])
    }

    /// Like [`Self::step_eval`] but also reports the input vectors feeding
    /// each LIF layer, for effective-operation counting.
    pub fn step_eval_traced(
        &self,
        state: &mut SnnState<S>,
        x: &[S],
    ) -> Result<([S; 2], [Vec<S>; 3]), DecoderError> {
        self.check_input(x)?;
        let alpha = self.surrogate_alpha;
        let r1 = self.l1.step(&mut state.s1, x, SpikeMode::Hard, alpha, None);
        let r2 = self
            .l2
            .step(&mut state.s2, &r1.s, SpikeMode::Hard, alpha, None);
        self.l3
            .step(&mut state.s3, &r2.s, SpikeMode::Hard, alpha, None);
        let out = [
            self.output_scale[0] * state.s3.u[0],
            self.output_scale[1] * state.s3.u[1],
        ];
        Ok((out, [x.to_vec(), r1.s, r2.s]))
    }

    /// Sequence forward with caching for BPTT.
    ///
    /// `mode` selects hard spikes (training/inference) or the smooth
    /// surrogate spike (gradient checks); `frozen` replays externally fixed
    /// reset values; `dropout_rng` enables per-step spike dropout between
    /// layers.
    pub fn forward_seq(
        &self,
        xs: &[Vec<S>],
        state: &mut SnnState<S>,
        mode: SpikeMode,
        frozen: Option<&SnnThetas<S>>,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Vec<[S; 2]>, SnnCache<S>), DecoderError> {
        let alpha = self.surrogate_alpha;
        let mut outs = Vec::with_capacity(xs.len());
        let mut cache = SnnCache {
            l1: Vec::with_capacity(xs.len()),
            l2: Vec::with_capacity(xs.len()),
            l3: Vec::with_capacity(xs.len()),
            mask1: dropout_rng.as_ref().and(if self.dropout_p > 0.0 {
                Some(Vec::new())
            } else {
                None
            }),
            mask2: dropout_rng.as_ref().and(if self.dropout_p > 0.0 {
                Some(Vec::new())
            } else {
                None
            }),
        };

        for (t, x) in xs.iter().enumerate() {
            self.check_input(x)?;
            let th1 = frozen.map(|f| &f.theta1[t][..]);
            let th2 = frozen.map(|f| &f.theta2[t][..]);

            let r1 = self.l1.step(&mut state.s1, x, mode, alpha, th1);
            let s1_fed = if let Some(masks) = cache.mask1.as_mut() {
                let rng = dropout_rng.as_deref_mut().expect("mask implies rng");
                let m = sample_mask(r1.s.len(), self.dropout_p, rng);
                let fed = mul(&r1.s, &m);
                masks.push(m);
                fed
            } else {
                r1.s.clone()
            };

            let r2 = self.l2.step(&mut state.s2, &s1_fed, mode, alpha, th2);
            let s2_fed = if let Some(masks) = cache.mask2.as_mut() {
                let rng = dropout_rng.as_deref_mut().expect("mask implies rng");
                let m = sample_mask(r2.s.len(), self.dropout_p, rng);
                let fed = mul(&r2.s, &m);
                masks.push(m);
                fed
            } else {
                r2.s.clone()
            };

            let r3 = self.l3.step(&mut state.s3, &s2_fed, mode, alpha, None);
            outs.push([
                self.output_scale[0] * r3.u[0],
                self.output_scale[1] * r3.u[1],
            ]);
            cache.l1.push(r1);
            cache.l2.push(r2);
            cache.l3.push(r3);
        }
        Ok((outs, cache))
    }

    /// BPTT over the cached sequence; reset values are treated as constants.
    pub fn backward_seq(&self, cache: &SnnCache<S>, douts: &[[S; 2]]) -> SnnGrads<S> {
        let steps = cache.l3.len();
        assert_eq!(douts.len(), steps);
        let alpha = self.surrogate_alpha;
        let beta3 = self.l3.beta();

        // Output layer: U3[t] = beta3*U3[t-1] + W3*s2_fed[t]; out = scale.U3.
        // No reset, no spike path; walk it in reverse directly.
        let mut dw3 = Matrix::zeros(self.l3.out_dim(), self.l3.in_dim());
        let mut dbeta3 = S::zero();
        let mut dscale = [S::zero(); 2];
        let mut ds2_fed: Vec<Vec<S>> = vec![Vec::new(); steps];
        let mut du3 = vec![S::zero(); 2];
        for t in (0..steps).rev() {
            let rec = &cache.l3[t];
            for j in 0..2 {
                dscale[j] = dscale[j] + douts[t][j] * rec.u[j];
                du3[j] = du3[j] * beta3 + douts[t][j] * self.output_scale[j];
                dbeta3 = dbeta3 + du3[j] * rec.u_prev[j];
            }
            dw3.add_outer(&du3, &rec.input);
            ds2_fed[t] = self.l3.w.matvec_t(&du3);
        }
        let draw_beta3 = dbeta3 * beta3 * (S::one() - beta3);

        // route through dropout masks back to the spikes themselves
        let ds2 = apply_masks(ds2_fed, cache.mask2.as_ref());
        let (g2, ds1_fed) = lif_backward_seq(&self.l2, &cache.l2, &ds2, alpha);
        let ds1 = apply_masks(ds1_fed, cache.mask1.as_ref());
        let (g1, _dx) = lif_backward_seq(&self.l1, &cache.l1, &ds1, alpha);

        SnnGrads {
            dw1: g1.dw,
            draw_beta1: g1.draw_beta,
            du_thr1: g1.du_thr,
            dw2: g2.dw,
            draw_beta2: g2.draw_beta,
            du_thr2: g2.du_thr,
            dw3,
            draw_beta3,
            du_thr3: S::zero(), // the output layer never spikes
            doutput_scale: dscale,
        }
    }

    pub fn param_count(&self) -> usize {
        self.l1.param_count() + self.l2.param_count() + self.l3.param_count() + 2
    }

    pub fn params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        self.l1.push_params(&mut out);
        self.l2.push_params(&mut out);
        self.l3.push_params(&mut out);
        out.extend_from_slice(&self.output_scale);
        out
    }

    pub fn set_params(&mut self, params: &[S]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        self.l1.read_params(&mut it);
        self.l2.read_params(&mut it);
        self.l3.read_params(&mut it);
        self.output_scale[0] = *it.next().unwrap();
        self.output_scale[1] = *it.next().unwrap();
    }
}

impl<S: Real> SnnGrads<S> {
    pub fn to_vec(&self) -> Vec<S> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.dw1.data);
        out.push(self.draw_beta1);
        out.push(self.du_thr1);
        out.extend_from_slice(&self.dw2.data);
        out.push(self.draw_beta2);
        out.push(self.du_thr2);
        out.extend_from_slice(&self.dw3.data);
        out.push(self.draw_beta3);
        out.push(self.du_thr3);
        out.extend_from_slice(&self.doutput_scale);
        out
    }
}

fn sample_mask<S: Real>(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<S> {
    let keep = S::of(1.0 / (1.0 - p));
    (0..len)
        .map(|_| {
            if rng.gen_range(0.0..1.0) < p {
                S::zero()
            } else {
                keep
            }
        })
        .collect()
}

fn mul<S: Real>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}

fn apply_masks<S: Real>(mut ds: Vec<Vec<S>>, masks: Option<&Vec<Vec<S>>>) -> Vec<Vec<S>> {
    if let Some(masks) = masks {
        for (d, m) in ds.iter_mut().zip(masks) {
            for (dv, &k) in d.iter_mut().zip(m) {
                *dv = *dv * k;
            }
        }
    }
    ds
}
